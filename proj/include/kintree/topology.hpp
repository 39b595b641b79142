#pragma once

#include "kintree/contact.hpp"
#include "kintree/kinematics.hpp"

#include <array>
#include <cstdint>
#include <json.hpp>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace kintree {

struct RewardWeights {
  double structure = 1.0;
  double statics = 1.0;
  double contact = 1.0;
  double symmetry = 1.0;
  double hierarchy = 1.0;

  std::array<double, 5> as_array() const { return {structure, statics, contact, symmetry, hierarchy}; }
  static RewardWeights from_array(const std::array<double, 5>& w) { return {w[0], w[1], w[2], w[3], w[4]}; }
};

struct RewardConfig {
  RewardWeights weights;
  double preferred_out_degree = 2.0;  // k
  double edge_penalty = 0.1;          // lambda
  double density = 1.0;               // rho
  double gravity = 9.81;
  double epsilon_sym = 1e-6;
  double epsilon_hier = 1e-6;

  void validate() const;
};

struct SearchConfig {
  double exploration = 1.414;
  int max_iterations = 2000;
  std::uint64_t seed = 0;
  double d_max = 0.25;

  void validate() const;
};

struct RewardBreakdown {
  double structure = 0.0;
  double statics = 0.0;
  double contact = 0.0;
  double symmetry = 0.0;
  double hierarchy = 0.0;
  double total = 0.0;

  nlohmann::json to_json() const;
};

/// Max-degree node, ties to the lowest id.
PartId select_base(const ConnectionGraph& graph);

/// Returns the graph plus virtual edges joining every component unreachable
/// from `base`, each to its nearest already-reached node by centroid distance.
/// Throws UnreachableComponent when that distance exceeds d_max.
ConnectionGraph attach_components(const ConnectionGraph& graph, PartId base,
                                  std::span<const NodeInfo> nodes, double d_max);

using UndirectedEdge = std::pair<PartId, PartId>;  // first < second

struct BfsResult {
  KinematicTree tree;
  std::set<UndirectedEdge> broken;
};

BfsResult bfs_orient(const ConnectionGraph& graph, PartId base, std::span<const NodeInfo> nodes,
                     double d_max);

/// Partial tree state of the search.
struct SearchState {
  KinematicTree tree;
  std::vector<char> visited;
  std::set<UndirectedEdge> broken;

  static SearchState initial(std::size_t node_count, PartId base);
  std::size_t visited_count() const;
  bool complete() const { return visited_count() == visited.size(); }
};

struct Action {
  PartId parent;
  PartId child;
  auto operator<=>(const Action&) const = default;
};

std::vector<Action> feasible_actions(const SearchState& state, const ConnectionGraph& graph,
                                     const SymmetryClusters& clusters);
SearchState apply_action(const SearchState& state, Action action, const ConnectionGraph& graph,
                         std::span<const NodeInfo> nodes);

double reward_struct(const KinematicTree& tree, const RewardConfig& config);
double reward_static(const KinematicTree& tree, std::span<const NodeInfo> nodes, const RewardConfig& config);
/// Robust torque scale used by reward_static.
double torque_scale(std::span<const double> torques);
double reward_contact(const KinematicTree& tree, const ConnectionGraph& graph);
/// S_k for one cluster given member depths and the number of distinct parents.
double symmetry_cluster_score(std::span<const int> depths, std::size_t distinct_parents, double epsilon);
double reward_sym(const KinematicTree& tree, const SymmetryClusters& clusters, const RewardConfig& config);
double reward_hier(const KinematicTree& tree, std::span<const NodeInfo> nodes, const RewardConfig& config);
RewardBreakdown reward(const KinematicTree& tree, const ConnectionGraph& graph,
                       std::span<const NodeInfo> nodes, const SymmetryClusters& clusters,
                       const RewardConfig& config);

struct SearchResult {
  KinematicTree tree;
  RewardBreakdown reward;
  int iterations = 0;
  int states = 0;
};

/// UCT search over oriented spanning trees of `graph` (which must already be
/// connected, see attach_components). When `warm_start` is given and satisfies
/// the cluster constraint, it seeds the best-tree cache.
SearchResult mcts_search(const ConnectionGraph& graph, PartId base, std::span<const NodeInfo> nodes,
                         const SymmetryClusters& clusters, const RewardConfig& reward_config,
                         const SearchConfig& search_config, const KinematicTree* warm_start = nullptr);

nlohmann::json tree_to_json(const KinematicTree& tree, const RewardBreakdown* reward = nullptr);
KinematicTree tree_from_json(const nlohmann::json& j, std::size_t node_count = 0);

}  // namespace kintree
