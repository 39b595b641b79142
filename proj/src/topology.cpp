#include "kintree/topology.hpp"

#include "kintree/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>

namespace kintree {

namespace {

constexpr double kGuard = 1e-9;

double guarded_inverse(double x) { return 1.0 / std::max(x, kGuard); }

UndirectedEdge make_edge(PartId a, PartId b) { return a < b ? UndirectedEdge{a, b} : UndirectedEdge{b, a}; }

/// Rebuilds the tree with edges listed in BFS order (children ascending).
KinematicTree canonical(const KinematicTree& tree) {
  KinematicTree out(tree.node_count(), tree.root());
  for (PartId n : tree.bfs_order())
    if (n != tree.root()) out.add_edge(*tree.edge_to(n));
  return out;
}

}  // namespace

void RewardConfig::validate() const {
  auto w = weights.as_array();
  double sum = 0.0;
  for (double x : w) {
    if (x < 0) throw Error(ErrorCode::InvalidInput, "reward weights must be >= 0");
    sum += x;
  }
  if (!(sum > 0)) throw Error(ErrorCode::InvalidInput, "reward weights must not all be zero");
  if (!(edge_penalty > 0) || !(density > 0) || !(gravity > 0) || !(epsilon_sym > 0) || !(epsilon_hier > 0))
    throw Error(ErrorCode::InvalidInput, "reward parameters must be > 0");
}

void SearchConfig::validate() const {
  if (!(exploration > 0)) throw Error(ErrorCode::InvalidInput, "exploration constant must be > 0");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidInput, "max_iterations must be >= 1");
  if (!(d_max > 0)) throw Error(ErrorCode::InvalidInput, "d_max must be > 0");
}

nlohmann::json RewardBreakdown::to_json() const {
  return {{"struct", structure}, {"static", statics}, {"contact", contact},
          {"sym", symmetry},     {"hier", hierarchy}, {"total", total}};
}

PartId select_base(const ConnectionGraph& graph) {
  if (graph.node_count() == 0) throw Error(ErrorCode::EmptyGraph, "cannot select base of empty graph");
  PartId best = 0;
  for (PartId n = 1; n < static_cast<PartId>(graph.node_count()); ++n)
    if (graph.degree(n) > graph.degree(best)) best = n;
  return best;
}

ConnectionGraph attach_components(const ConnectionGraph& graph, PartId base,
                                  std::span<const NodeInfo> nodes, double d_max) {
  const std::size_t n = graph.node_count();
  if (base < 0 || static_cast<std::size_t>(base) >= n) throw Error(ErrorCode::InvalidInput, "base not in graph");
  ConnectionGraph out = graph;
  std::vector<char> reached(n, 0);
  auto flood = [&](PartId start) {
    std::deque<PartId> q{start};
    reached[start] = 1;
    while (!q.empty()) {
      PartId u = q.front();
      q.pop_front();
      for (PartId v : out.neighbors(u))
        if (!reached[v]) {
          reached[v] = 1;
          q.push_back(v);
        }
    }
  };
  flood(base);
  for (;;) {
    double best = std::numeric_limits<double>::infinity();
    PartId bu = -1, bw = -1;
    for (PartId u = 0; u < static_cast<PartId>(n); ++u) {
      if (!reached[u]) continue;
      for (PartId w = 0; w < static_cast<PartId>(n); ++w) {
        if (reached[w]) continue;
        double d = (nodes[u].centroid - nodes[w].centroid).norm();
        if (d < best) {
          best = d;
          bu = u;
          bw = w;
        }
      }
    }
    if (bu < 0) break;
    if (best > d_max)
      throw Error(ErrorCode::UnreachableComponent,
                  "part " + std::to_string(bw) + " is " + std::to_string(best) + " from the tree (d_max " +
                      std::to_string(d_max) + ")");
    out.add_edge({bu, bw, best, 0.0, true});
    flood(bw);
  }
  return out;
}

BfsResult bfs_orient(const ConnectionGraph& graph, PartId base, std::span<const NodeInfo> nodes,
                     double d_max) {
  ConnectionGraph g = attach_components(graph, base, nodes, d_max);
  const std::size_t n = g.node_count();
  BfsResult r{KinematicTree(n, base), {}};
  std::vector<char> visited(n, 0);
  std::deque<PartId> q{base};
  visited[base] = 1;
  while (!q.empty()) {
    PartId u = q.front();
    q.pop_front();
    for (PartId v : g.neighbors(u)) {
      if (!visited[v]) {
        visited[v] = 1;
        const ContactEdge* e = g.find(u, v);
        JointSpec joint;
        joint.origin = nodes[v].centroid - nodes[u].centroid;
        r.tree.add_edge({u, v, joint, e->is_virtual});
        q.push_back(v);
      } else if (r.tree.parent(u) != v && r.tree.parent(v) != u) {
        r.broken.insert(make_edge(u, v));
      }
    }
  }
  return r;
}

SearchState SearchState::initial(std::size_t node_count, PartId base) {
  SearchState s{KinematicTree(node_count, base), std::vector<char>(node_count, 0), {}};
  s.visited[base] = 1;
  return s;
}

std::size_t SearchState::visited_count() const {
  return static_cast<std::size_t>(std::count(visited.begin(), visited.end(), 1));
}

std::vector<Action> feasible_actions(const SearchState& state, const ConnectionGraph& graph,
                                     const SymmetryClusters& clusters) {
  std::vector<Action> out;
  for (PartId u = 0; u < static_cast<PartId>(graph.node_count()); ++u) {
    if (!state.visited[u]) continue;
    for (PartId v : graph.neighbors(u)) {
      if (state.visited[v]) continue;
      if (state.broken.contains(make_edge(u, v))) continue;
      if (clusters.same_multi_member_cluster(u, v)) continue;
      out.push_back({u, v});
    }
  }
  return out;
}

SearchState apply_action(const SearchState& state, Action a, const ConnectionGraph& graph,
                         std::span<const NodeInfo> nodes) {
  const auto n = static_cast<PartId>(graph.node_count());
  if (a.parent < 0 || a.parent >= n || a.child < 0 || a.child >= n || !state.visited[a.parent] ||
      state.visited[a.child] || !graph.has_edge(a.parent, a.child) ||
      state.broken.contains(make_edge(a.parent, a.child)))
    throw Error(ErrorCode::InfeasibleAction,
                std::to_string(a.parent) + "->" + std::to_string(a.child) + " is not feasible");
  SearchState next = state;
  JointSpec joint;
  joint.origin = nodes[a.child].centroid - nodes[a.parent].centroid;
  next.tree.add_edge({a.parent, a.child, joint, graph.find(a.parent, a.child)->is_virtual});
  for (PartId w : graph.neighbors(a.child))
    if (w != a.parent && state.visited[w]) next.broken.insert(make_edge(a.child, w));
  next.visited[a.child] = 1;
  return next;
}

// ---------------------------------------------------------------------------
// Reward terms

double reward_struct(const KinematicTree& tree, const RewardConfig& config) {
  const auto depth = tree.depths();
  const auto deg = tree.out_degrees();
  const double n = static_cast<double>(tree.node_count());
  double d2 = 0.0, dev = 0.0;
  for (std::size_t i = 0; i < tree.node_count(); ++i) {
    d2 += static_cast<double>(depth[i]) * depth[i];
    double x = deg[i] - config.preferred_out_degree;
    dev += x * x;
  }
  double denom = d2 / n + dev / n + config.edge_penalty * static_cast<double>(tree.edges().size());
  return guarded_inverse(denom);
}

double torque_scale(std::span<const double> torques) {
  std::vector<double> t(torques.begin(), torques.end());
  std::size_t nonzero = 0;
  double largest = 0.0, nonzero_sum = 0.0;
  for (double x : t) {
    if (x > 0) {
      ++nonzero;
      nonzero_sum += x;
    }
    largest = std::max(largest, x);
  }
  if (nonzero < 2) return std::max(largest, kGuard);
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  const double med = median(t);
  std::vector<double> dev;
  dev.reserve(t.size());
  for (double x : t) dev.push_back(std::abs(x - med));
  const double mad = 1.4826 * median(dev);
  // Identical torques give MAD = 0; fall back to their mean magnitude.
  if (mad < kGuard) return std::max(nonzero_sum / static_cast<double>(nonzero), kGuard);
  return mad;
}

double reward_static(const KinematicTree& tree, std::span<const NodeInfo> nodes, const RewardConfig& config) {
  const auto sub = subtree_mass(tree, nodes, config.density);
  const Vec3 down(0.0, 0.0, -1.0);
  std::vector<double> torques;
  double total = 0.0;
  for (PartId i = 0; i < static_cast<PartId>(tree.node_count()); ++i) {
    if (i == tree.root()) continue;
    const Vec3 force = sub.mass[i] * config.gravity * down;
    double tau = (sub.center[i] - nodes[i].centroid).cross(force).norm();
    // Collinear offsets leave only rounding noise.
    if (tau <= 1e-12 * force.norm()) tau = 0.0;
    torques.push_back(tau);
    total += tau;
  }
  if (total == 0.0) return 1.0;
  return 1.0 / (1.0 + total / torque_scale(torques));
}

double reward_contact(const KinematicTree& tree, const ConnectionGraph& graph) {
  if (tree.edges().empty()) return 1.0;
  double sum = 0.0;
  for (const auto& e : tree.edges()) sum += e.is_virtual ? 0.0 : graph.strength(e.parent, e.child);
  return sum / static_cast<double>(tree.edges().size());
}

double symmetry_cluster_score(std::span<const int> depths, std::size_t distinct_parents, double epsilon) {
  const double n = static_cast<double>(depths.size());
  double mean = 0.0;
  for (int d : depths) mean += d;
  mean /= n;
  double var = 0.0;
  for (int d : depths) var += (d - mean) * (d - mean);
  var /= n;
  double spread = (static_cast<double>(distinct_parents) - 1.0) / (n - 1.0 + epsilon);
  return 1.0 / (1.0 + var) + (1.0 - spread);
}

double reward_sym(const KinematicTree& tree, const SymmetryClusters& clusters, const RewardConfig& config) {
  const auto depth = tree.depths();
  double sum = 0.0;
  int count = 0;
  for (const auto& c : clusters.clusters) {
    if (c.size() < 2) continue;
    std::vector<int> d;
    std::set<PartId> parents;
    for (PartId i : c) {
      d.push_back(depth[i]);
      if (i != tree.root()) parents.insert(tree.parent(i));
    }
    sum += symmetry_cluster_score(d, parents.size(), config.epsilon_sym);
    ++count;
  }
  return count == 0 ? 1.0 : sum / count;
}

double reward_hier(const KinematicTree& tree, std::span<const NodeInfo> nodes, const RewardConfig& config) {
  double penalty = 0.0;
  for (const auto& e : tree.edges())
    penalty += std::max(0.0, nodes[e.child].volume / (nodes[e.parent].volume + config.epsilon_hier) - 1.0);
  return 1.0 / (1.0 + penalty);
}

RewardBreakdown reward(const KinematicTree& tree, const ConnectionGraph& graph,
                       std::span<const NodeInfo> nodes, const SymmetryClusters& clusters,
                       const RewardConfig& config) {
  RewardBreakdown r;
  r.structure = reward_struct(tree, config);
  r.statics = reward_static(tree, nodes, config);
  r.contact = reward_contact(tree, graph);
  r.symmetry = reward_sym(tree, clusters, config);
  r.hierarchy = reward_hier(tree, nodes, config);
  const auto& w = config.weights;
  r.total = w.structure * r.structure + w.statics * r.statics + w.contact * r.contact +
            w.symmetry * r.symmetry + w.hierarchy * r.hierarchy;
  return r;
}

// ---------------------------------------------------------------------------
// Search

namespace {

struct SearchNode {
  SearchState state;
  std::vector<Action> actions;
  std::vector<int> children;  // -1 while untried
  std::vector<std::size_t> untried;
  double visits = 0.0;
  double value = 0.0;
};

std::string state_key(const SearchState& s) {
  std::string key;
  key.reserve(s.visited.size() * 2);
  for (PartId i = 0; i < static_cast<PartId>(s.visited.size()); ++i) {
    PartId p = s.visited[i] ? s.tree.parent(i) : -2;
    key.push_back(static_cast<char>(p & 0xff));
    key.push_back(static_cast<char>((p >> 8) & 0xff));
  }
  return key;
}

class Search {
 public:
  Search(const ConnectionGraph& graph, PartId base, std::span<const NodeInfo> nodes,
         const SymmetryClusters& clusters, const RewardConfig& rc, const SearchConfig& sc)
      : graph_(graph), nodes_(nodes), clusters_(clusters), rc_(rc), sc_(sc), rng_(sc.seed) {
    node_for(SearchState::initial(graph.node_count(), base));
  }

  void offer(const KinematicTree& tree) {
    auto r = reward(tree, graph_, nodes_, clusters_, rc_);
    if (!best_ || r.total > best_reward_.total) {
      best_ = canonical(tree);
      best_reward_ = r;
    }
  }

  void run() {
    for (int it = 0; it < sc_.max_iterations; ++it) iterate();
  }

  bool has_best() const { return best_.has_value(); }
  SearchResult result(int iterations) const {
    return {*best_, best_reward_, iterations, static_cast<int>(nodes_store_.size())};
  }

 private:
  int node_for(SearchState state) {
    auto key = state_key(state);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    SearchNode node;
    node.actions = feasible_actions(state, graph_, clusters_);
    node.children.assign(node.actions.size(), -1);
    for (std::size_t i = 0; i < node.actions.size(); ++i) node.untried.push_back(i);
    node.state = std::move(state);
    int id = static_cast<int>(nodes_store_.size());
    nodes_store_.push_back(std::move(node));
    index_.emplace(std::move(key), id);
    return id;
  }

  double immediate_score(const SearchState& s, const Action& a, const std::vector<int>& depth) const {
    const auto& w = rc_.weights;
    double strength = graph_.strength(a.parent, a.child);
    double hier = std::max(0.0, nodes_[a.child].volume / (nodes_[a.parent].volume + rc_.epsilon_hier) - 1.0);
    double d = depth[a.parent] + 1.0;
    (void)s;
    return w.contact * strength - w.hierarchy * hier -
           w.structure * d * d / static_cast<double>(graph_.node_count());
  }

  /// Greedy completion; returns false on a dead end.
  bool rollout(SearchState s, KinematicTree* out) const {
    std::vector<int> depth(graph_.node_count(), 0);
    for (PartId n : s.tree.bfs_order())
      if (n != s.tree.root()) depth[n] = depth[s.tree.parent(n)] + 1;
    while (!s.complete()) {
      auto actions = feasible_actions(s, graph_, clusters_);
      if (actions.empty()) return false;
      // Actions are already in (parent, child) order, so the first maximum wins ties.
      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < actions.size(); ++i) {
        double sc = immediate_score(s, actions[i], depth);
        if (sc > best_score) {
          best_score = sc;
          best = i;
        }
      }
      depth[actions[best].child] = depth[actions[best].parent] + 1;
      s = apply_action(s, actions[best], graph_, nodes_);
    }
    *out = s.tree;
    return true;
  }

  void iterate() {
    std::vector<int> path{0};
    int current = 0;
    while (!nodes_store_[current].state.complete()) {
      SearchNode& node = nodes_store_[current];
      if (!node.untried.empty()) {
        std::size_t pick = rng_.index(node.untried.size());
        std::size_t ai = node.untried[pick];
        node.untried.erase(node.untried.begin() + static_cast<std::ptrdiff_t>(pick));
        SearchState next = apply_action(node.state, node.actions[ai], graph_, nodes_);
        int child = node_for(std::move(next));
        nodes_store_[current].children[ai] = child;  // node_for may reallocate
        path.push_back(child);
        current = child;
        break;
      }
      if (node.actions.empty()) break;  // dead end
      const double log_n = std::log(std::max(node.visits, 1.0));
      int best_child = -1;
      double best_uct = -std::numeric_limits<double>::infinity();
      for (int c : node.children) {
        const SearchNode& ch = nodes_store_[c];
        double uct = ch.visits > 0
                         ? ch.value / ch.visits + sc_.exploration * std::sqrt(log_n / ch.visits)
                         : std::numeric_limits<double>::infinity();
        if (uct > best_uct) {
          best_uct = uct;
          best_child = c;
        }
      }
      path.push_back(best_child);
      current = best_child;
    }

    double value = 0.0;
    KinematicTree completed;
    if (rollout(nodes_store_[current].state, &completed)) {
      auto r = reward(completed, graph_, nodes_, clusters_, rc_);
      value = r.total;
      if (!best_ || r.total > best_reward_.total) {
        best_ = canonical(completed);
        best_reward_ = r;
      }
    }
    for (int n : path) {
      nodes_store_[n].visits += 1.0;
      nodes_store_[n].value += value;
    }
  }

  const ConnectionGraph& graph_;
  std::span<const NodeInfo> nodes_;
  const SymmetryClusters& clusters_;
  const RewardConfig& rc_;
  const SearchConfig& sc_;
  Rng rng_;
  std::vector<SearchNode> nodes_store_;
  std::unordered_map<std::string, int> index_;
  std::optional<KinematicTree> best_;
  RewardBreakdown best_reward_;
};

bool respects_constraints(const KinematicTree& tree, const ConnectionGraph& graph,
                          const SymmetryClusters& clusters) {
  if (!tree.is_spanning()) return false;
  for (const auto& e : tree.edges()) {
    if (!graph.has_edge(e.parent, e.child)) return false;
    if (clusters.same_multi_member_cluster(e.parent, e.child)) return false;
  }
  return true;
}

}  // namespace

SearchResult mcts_search(const ConnectionGraph& graph, PartId base, std::span<const NodeInfo> nodes,
                         const SymmetryClusters& clusters, const RewardConfig& reward_config,
                         const SearchConfig& search_config, const KinematicTree* warm_start) {
  reward_config.validate();
  search_config.validate();
  if (graph.node_count() == 0) throw Error(ErrorCode::EmptyGraph, "empty graph");
  if (nodes.size() != graph.node_count()) throw Error(ErrorCode::InvalidInput, "node info count mismatch");
  Search search(graph, base, nodes, clusters, reward_config, search_config);
  if (warm_start && warm_start->root() == base && respects_constraints(*warm_start, graph, clusters))
    search.offer(*warm_start);
  search.run();
  if (!search.has_best())
    throw Error(ErrorCode::SearchFailed, "no spanning tree satisfies the search constraints");
  return search.result(search_config.max_iterations);
}

nlohmann::json tree_to_json(const KinematicTree& tree, const RewardBreakdown* r) {
  nlohmann::json j;
  j["root"] = tree.root();
  j["node_count"] = tree.node_count();
  j["edges"] = nlohmann::json::array();
  for (const auto& e : tree.edges()) {
    nlohmann::json ej;
    ej["parent"] = e.parent;
    ej["child"] = e.child;
    ej["origin"] = {e.joint.origin.x(), e.joint.origin.y(), e.joint.origin.z()};
    ej["joint_type"] = std::string(to_string(e.joint.type));
    if (e.joint.axis) ej["axis"] = {e.joint.axis->x(), e.joint.axis->y(), e.joint.axis->z()};
    if (e.joint.pivot) ej["pivot"] = {e.joint.pivot->x(), e.joint.pivot->y(), e.joint.pivot->z()};
    if (e.joint.type != JointType::Fixed) ej["score"] = e.joint.score;
    if (e.is_virtual) ej["virtual"] = true;
    j["edges"].push_back(ej);
  }
  if (r) j["reward_breakdown"] = r->to_json();
  return j;
}

KinematicTree tree_from_json(const nlohmann::json& j, std::size_t node_count) {
  try {
    auto vec = [](const nlohmann::json& a) {
      if (!a.is_array() || a.size() != 3) throw Error(ErrorCode::ParseError, "expected 3-vector");
      return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    };
    std::size_t n = node_count ? node_count : j.value("node_count", j.at("edges").size() + 1);
    KinematicTree tree(n, j.at("root").get<int>());
    for (const auto& e : j.at("edges")) {
      TreeEdge te;
      te.parent = e.at("parent").get<int>();
      te.child = e.at("child").get<int>();
      te.joint.origin = vec(e.at("origin"));
      te.joint.type = joint_type_from_string(e.at("joint_type").get<std::string>());
      if (e.contains("axis")) te.joint.axis = vec(e.at("axis"));
      if (e.contains("pivot")) te.joint.pivot = vec(e.at("pivot"));
      te.joint.score = e.value("score", 0.0);
      te.is_virtual = e.value("virtual", false);
      tree.add_edge(te);
    }
    return tree;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, ex.what());
  }
}

}  // namespace kintree
