#include "kintree/error.hpp"

namespace kintree {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyPointSet: return "EmptyPointSet";
    case ErrorCode::DegenerateMesh: return "DegenerateMesh";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::UnreachableComponent: return "UnreachableComponent";
    case ErrorCode::InfeasibleAction: return "InfeasibleAction";
    case ErrorCode::SearchFailed: return "SearchFailed";
    case ErrorCode::NoContact: return "NoContact";
    case ErrorCode::DegenerateAxis: return "DegenerateAxis";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NonUnitAxis: return "NonUnitAxis";
    case ErrorCode::InvalidTree: return "InvalidTree";
    case ErrorCode::NonTreeStructure: return "NonTreeStructure";
    case ErrorCode::CorrespondenceMissing: return "CorrespondenceMissing";
  }
  return "Unknown";
}

}  // namespace kintree
