#pragma once

#include <stdexcept>
#include <string>

namespace kintree {

enum class ErrorCode {
  InvalidInput,
  ParseError,
  IoError,
  EmptyPointSet,
  DegenerateMesh,
  EmptyGraph,
  UnreachableComponent,
  InfeasibleAction,
  SearchFailed,
  NoContact,
  DegenerateAxis,
  NonFinite,
  NonUnitAxis,
  InvalidTree,
  NonTreeStructure,
  CorrespondenceMissing,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. Every failure carries a machine-readable code so
/// callers (the CLI in particular) can map it onto exit codes and stage tags.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kintree
