#pragma once

#include "kintree/contact.hpp"
#include "kintree/error.hpp"
#include "kintree/eval.hpp"
#include "kintree/joints.hpp"
#include "kintree/topology.hpp"
#include "kintree/urdf.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace kintree {

enum class Stage { Ingest, Sdf, Contact, Topology, Joints, Export };
std::string_view to_string(Stage s);

/// Failure inside a pipeline stage; keeps the underlying error code.
class StageError : public Error {
 public:
  StageError(Stage stage, const Error& cause)
      : Error(cause.code(), std::string(to_string(stage)) + " stage failed: " + cause.what()), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

enum class TopologyMode { Mcts, Bfs };

/// Every sub-config at the scale of one assembly.
struct ResolvedConfig {
  ContactConfig contact;
  RewardConfig reward;
  SearchConfig search;
  DwCavlConfig dwcavl;
  SdfOptions sdf;
  SymmetryOptions symmetry;
  double symmetry_threshold = 0.0;
  ValidationLimits validation;
};

/// Pipeline settings. Section values left unset take defaults scaled to the
/// assembly diagonal; `overrides` holds the user's JSON settings verbatim.
struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  TopologyMode topology = TopologyMode::Mcts;
  bool anchor = true;
  std::filesystem::path output = "kintree_out";
  MeshMode mesh_mode = MeshMode::Copy;
  std::string robot_name = "kintree";
  std::optional<std::filesystem::path> sdf_cache;
  nlohmann::json overrides = nlohmann::json::object();  // per-section keys

  /// Strict: unknown keys and wrong types throw InvalidInput.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
  /// Applies "section.key=value" (value parsed as JSON, else taken as a string).
  void set(const std::string& assignment);
  nlohmann::json to_json() const;
  ResolvedConfig resolve(double diagonal) const;
  int thread_count() const;
};

struct PipelineResult {
  LoadedAssembly assembly;
  ConnectionGraph graph;
  KinematicTree tree;
  RewardBreakdown reward;
  std::vector<EdgeJointResult> joints;  // parallel to tree.edges()
  std::optional<MetricsReport> metrics;
  std::filesystem::path urdf;
  std::filesystem::path tree_dump;
  std::filesystem::path joints_dump;
  std::filesystem::path graph_dump;
};

/// Runs every stage in order and writes the artifacts to config.output.
/// Throws StageError tagged with the failing stage.
PipelineResult run_pipeline(const std::filesystem::path& manifest_path, const PipelineConfig& config,
                            const JointTypePrior& prior = AbstainPrior{});

}  // namespace kintree
