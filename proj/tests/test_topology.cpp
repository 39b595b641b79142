#include "kintree/error.hpp"
#include "kintree/topology.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

using namespace kintree;
using oracle::brute_force_max;
using oracle::enumerate_arborescences;

namespace {

ConnectionGraph graph_of(std::size_t n, std::vector<std::pair<int, int>> edges, double strength = 1.0) {
  ConnectionGraph g(n);
  for (auto [u, v] : edges) g.add_edge({u, v, 0.0, strength, false});
  return g;
}

std::vector<NodeInfo> line_nodes(std::size_t n) {
  std::vector<NodeInfo> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({Vec3(double(i), 0, 0), 1.0});
  return out;
}

KinematicTree tree_of(std::size_t n, PartId root, std::vector<std::pair<int, int>> edges) {
  KinematicTree t(n, root);
  for (auto [p, c] : edges) t.add_edge({p, c, {}, false});
  return t;
}

std::set<std::pair<int, int>> edge_set(const KinematicTree& t) {
  std::set<std::pair<int, int>> s;
  for (const auto& e : t.edges()) s.insert({e.parent, e.child});
  return s;
}

}  // namespace

TEST_CASE("select_base") {
  CHECK(select_base(graph_of(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}})) == 0);
  CHECK(select_base(graph_of(5, {{4, 1}, {4, 2}, {4, 3}, {4, 0}})) == 4);
  CHECK(select_base(graph_of(4, {{0, 1}, {1, 2}, {2, 3}})) == 1);
  CHECK(select_base(graph_of(1, {})) == 0);
  try {
    select_base(ConnectionGraph(0));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyGraph);
  }
}

TEST_CASE("bfs_orient: tree graph") {
  auto g = graph_of(4, {{0, 1}, {1, 2}, {1, 3}});
  auto nodes = line_nodes(4);
  auto r = bfs_orient(g, 1, nodes, 10.0);
  CHECK(r.broken.empty());
  CHECK(edge_set(r.tree) == std::set<std::pair<int, int>>{{1, 0}, {1, 2}, {1, 3}});
  for (const auto& e : r.tree.edges())
    CHECK(e.joint.origin.isApprox(nodes[e.child].centroid - nodes[e.parent].centroid));
}

TEST_CASE("bfs_orient: triangle from a") {
  auto g = graph_of(3, {{0, 1}, {1, 2}, {0, 2}});
  auto r = bfs_orient(g, 0, line_nodes(3), 10.0);
  CHECK(edge_set(r.tree) == std::set<std::pair<int, int>>{{0, 1}, {0, 2}});
  CHECK(r.broken == std::set<UndirectedEdge>{{1, 2}});
}

TEST_CASE("bfs_orient: components joined by a virtual edge") {
  auto g = graph_of(4, {{0, 1}, {2, 3}});
  std::vector<NodeInfo> nodes{{Vec3(0, 0, 0), 1}, {Vec3(1, 0, 0), 1}, {Vec3(1.1, 0, 0), 1}, {Vec3(2, 0, 0), 1}};
  auto r = bfs_orient(g, 0, nodes, 0.2);
  REQUIRE(r.tree.is_spanning());
  const TreeEdge* e = r.tree.edge_to(2);
  REQUIRE(e);
  CHECK(e->parent == 1);
  CHECK(e->is_virtual);
  auto attached = attach_components(g, 0, nodes, 0.2);
  REQUIRE(attached.find(1, 2));
  CHECK(attached.find(1, 2)->distance == doctest::Approx(0.1));
  try {
    bfs_orient(g, 0, nodes, 0.05);
    FAIL("expected throw");
  } catch (const Error& ex) {
    CHECK(ex.code() == ErrorCode::UnreachableComponent);
  }
}

TEST_CASE("feasible actions and transitions") {
  // Torso 0 and legs 1,2 in one cluster with a leg-leg contact.
  auto g = graph_of(3, {{0, 1}, {0, 2}, {1, 2}});
  SymmetryClusters clusters{{{0}, {1, 2}}, 0.1};
  auto nodes = line_nodes(3);
  auto s = SearchState::initial(3, 1);
  auto acts = feasible_actions(s, g, clusters);
  CHECK(acts == std::vector<Action>{{1, 0}});

  auto star = graph_of(4, {{0, 1}, {0, 2}, {0, 3}});
  auto s0 = SearchState::initial(4, 0);
  CHECK(feasible_actions(s0, star, SymmetryClusters::singletons(4)) ==
        std::vector<Action>{{0, 1}, {0, 2}, {0, 3}});
  auto full = s0;
  for (int v = 1; v < 4; ++v) full = apply_action(full, {0, v}, star, line_nodes(4));
  CHECK(full.complete());
  CHECK(feasible_actions(full, star, SymmetryClusters::singletons(4)).empty());
}

TEST_CASE("apply_action on a triangle") {
  auto g = graph_of(3, {{0, 1}, {1, 2}, {0, 2}});
  auto nodes = line_nodes(3);
  auto s = SearchState::initial(3, 0);
  auto s1 = apply_action(s, {0, 1}, g, nodes);
  CHECK(s1.broken.empty());
  CHECK(s1.tree.edge_to(1)->joint.type == JointType::Fixed);
  CHECK(s1.tree.edge_to(1)->joint.origin.isApprox(Vec3(1, 0, 0)));
  auto s2 = apply_action(s1, {0, 2}, g, nodes);
  CHECK(s2.broken == std::set<UndirectedEdge>{{1, 2}});
  try {
    apply_action(s2, {0, 2}, g, nodes);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfeasibleAction);
  }
  CHECK_THROWS_AS(apply_action(s1, {0, 1}, g, nodes), Error);
}

TEST_CASE("reward_struct") {
  RewardConfig cfg;
  cfg.preferred_out_degree = 1;
  cfg.edge_penalty = 0.1;
  auto chain3 = tree_of(3, 0, {{0, 1}, {1, 2}});
  // mean d^2 = 5/3, mean (deg-1)^2 = 1/3, lambda |E| = 0.2.
  CHECK(reward_struct(chain3, cfg) == doctest::Approx(1.0 / (5.0 / 3 + 1.0 / 3 + 0.2)));
  CHECK(reward_struct(chain3, cfg) == doctest::Approx(0.4545).epsilon(1e-3));
  auto chain4 = tree_of(4, 0, {{0, 1}, {1, 2}, {2, 3}});
  CHECK(reward_struct(chain4, cfg) < reward_struct(chain3, cfg));
  RewardConfig zero;
  zero.preferred_out_degree = 0;
  double single = reward_struct(KinematicTree(1, 0), zero);
  CHECK(std::isfinite(single));
  CHECK(single == doctest::Approx(1e9));
}

TEST_CASE("reward_static") {
  RewardConfig cfg;
  // Vertical stack: every subtree center lies directly below or above its node.
  std::vector<NodeInfo> stack{{Vec3(0, 0, 2), 1}, {Vec3(0, 0, 1), 2}, {Vec3(0, 0, 0), 3}};
  CHECK(reward_static(tree_of(3, 0, {{0, 1}, {1, 2}}), stack, cfg) == 1.0);
  CHECK(reward_static(KinematicTree(1, 0), stack, cfg) == 1.0);
  // Root -> a -> b with b one unit from a along x: torque at a is m_b g |dx| = 9.81,
  // the only nonzero torque, so sigma = 9.81 and the reward is 1/2.
  std::vector<NodeInfo> offset{{Vec3(0, 0, 1), 1}, {Vec3(0, 0, 0), 1}, {Vec3(1, 0, 0), 1}};
  const double torque = 9.81;
  std::vector<double> single{0.0, torque};
  CHECK(torque_scale(single) == doctest::Approx(torque));
  CHECK(reward_static(tree_of(3, 0, {{0, 1}, {1, 2}}), offset, cfg) == doctest::Approx(0.5));
  // Independent evaluation of the torque sum with a MAD scale.
  std::vector<NodeInfo> wide{{Vec3(0, 0, 0), 4}, {Vec3(1, 0, 0), 1}, {Vec3(0, 2, 0), 1},
                             {Vec3(3, 3, 0), 1}, {Vec3(3, 4, 0), 2}};
  auto t = tree_of(5, 0, {{0, 1}, {0, 2}, {1, 3}, {3, 4}});
  auto sub = subtree_mass(t, wide, 1.0);
  std::vector<double> taus;
  double total = 0.0;
  for (int i = 1; i < 5; ++i) {
    Vec3 f(0, 0, -sub.mass[i] * 9.81);
    double tau = (sub.center[i] - wide[i].centroid).cross(f).norm();
    taus.push_back(tau);
    total += tau;
  }
  std::vector<double> sorted = taus;
  std::sort(sorted.begin(), sorted.end());
  double med = 0.5 * (sorted[1] + sorted[2]);
  std::vector<double> dev;
  for (double x : taus) dev.push_back(std::abs(x - med));
  std::sort(dev.begin(), dev.end());
  double sigma = 1.4826 * 0.5 * (dev[1] + dev[2]);
  CHECK(reward_static(t, wide, cfg) == doctest::Approx(1.0 / (1.0 + total / sigma)));
}

TEST_CASE("subtree mass recursion") {
  std::vector<NodeInfo> nodes{{Vec3(0, 0, 0), 1}, {Vec3(1, 0, 0), 2}, {Vec3(0, 1, 0), 3}, {Vec3(1, 1, 1), 4}};
  auto t = tree_of(4, 0, {{0, 1}, {0, 2}, {1, 3}});
  auto s = subtree_mass(t, nodes, 2.0);
  CHECK(s.mass[3] == 8.0);
  CHECK(s.mass[1] == 4.0 + s.mass[3]);
  CHECK(s.mass[0] == 2.0 + s.mass[1] + s.mass[2]);
  CHECK(s.center[1].isApprox((4.0 * nodes[1].centroid + 8.0 * nodes[3].centroid) / 12.0));
}

TEST_CASE("reward_contact") {
  ConnectionGraph g(3);
  g.add_edge({0, 1, 0.0, 1.0, false});
  g.add_edge({1, 2, 0.0, 0.5, false});
  CHECK(reward_contact(tree_of(3, 0, {{0, 1}, {1, 2}}), g) == doctest::Approx(0.75));
  ConnectionGraph v(2);
  v.add_edge({0, 1, 0.1, 0.0, true});
  KinematicTree vt(2, 0);
  vt.add_edge({0, 1, {}, true});
  CHECK(reward_contact(vt, v) == 0.0);
  ConnectionGraph one(2);
  one.add_edge({0, 1, 0.0, 0.9, false});
  CHECK(reward_contact(tree_of(2, 0, {{0, 1}}), one) == doctest::Approx(0.9));
}

TEST_CASE("reward_sym") {
  const double eps = 1e-6;
  std::vector<int> same{1, 1};
  CHECK(symmetry_cluster_score(same, 1, eps) == doctest::Approx(2.0));
  std::vector<int> mixed{1, 2};
  CHECK(symmetry_cluster_score(mixed, 1, eps) == doctest::Approx(1.8));
  std::vector<int> fingers{2, 2, 2, 2};
  CHECK(symmetry_cluster_score(fingers, 2, eps) == doctest::Approx(1.0 + (1.0 - 1.0 / 3.0)).epsilon(1e-6));

  RewardConfig cfg;
  SymmetryClusters legs{{{0}, {1, 2}}, 0.1};
  CHECK(reward_sym(tree_of(3, 0, {{0, 1}, {0, 2}}), legs, cfg) == doctest::Approx(2.0));
  CHECK(reward_sym(tree_of(3, 0, {{0, 1}, {1, 2}}), legs, cfg) < 2.0);
  CHECK(reward_sym(tree_of(3, 0, {{0, 1}, {1, 2}}), SymmetryClusters::singletons(3), cfg) == 1.0);
}

TEST_CASE("reward_hier") {
  RewardConfig cfg;
  std::vector<NodeInfo> big_root{{Vec3::Zero(), 5}, {Vec3::Zero(), 2}, {Vec3::Zero(), 1}};
  CHECK(reward_hier(tree_of(3, 0, {{0, 1}, {1, 2}}), big_root, cfg) == 1.0);
  std::vector<NodeInfo> grow{{Vec3::Zero(), 1}, {Vec3::Zero(), 2}};
  CHECK(reward_hier(tree_of(2, 0, {{0, 1}}), grow, cfg) == doctest::Approx(0.5).epsilon(1e-5));
  std::vector<NodeInfo> equal{{Vec3::Zero(), 1}, {Vec3::Zero(), 1}};
  CHECK(reward_hier(tree_of(2, 0, {{0, 1}}), equal, cfg) == 1.0);
}

TEST_CASE("combined reward is a weighted sum") {
  auto g = graph_of(3, {{0, 1}, {1, 2}}, 0.7);
  std::vector<NodeInfo> nodes{{Vec3(0, 0, 0), 3}, {Vec3(1, 0, 0.5), 2}, {Vec3(2, 0, 0), 1}};
  auto t = tree_of(3, 0, {{0, 1}, {1, 2}});
  auto clusters = SymmetryClusters::singletons(3);
  RewardConfig cfg;
  auto r = reward(t, g, nodes, clusters, cfg);
  double sum = reward_struct(t, cfg) + reward_static(t, nodes, cfg) + reward_contact(t, g) +
               reward_sym(t, clusters, cfg) + reward_hier(t, nodes, cfg);
  CHECK(r.total == doctest::Approx(sum));
  RewardConfig only;
  only.weights = {0, 0, 1, 0, 0};
  CHECK(reward(t, g, nodes, clusters, only).total == doctest::Approx(reward_contact(t, g)));
  RewardConfig twice;
  twice.weights = {2, 2, 2, 2, 2};
  CHECK(reward(t, g, nodes, clusters, twice).total == doctest::Approx(2 * r.total));
  CHECK(r.structure > 0);
  CHECK(r.statics > 0);
  CHECK(r.contact > 0);
  CHECK(r.symmetry > 0);
  CHECK(r.hierarchy > 0);
}

TEST_CASE("reward is invariant to relabeling") {
  auto g = graph_of(4, {{0, 1}, {1, 2}, {1, 3}, {2, 3}}, 0.8);
  std::vector<NodeInfo> nodes{{Vec3(0, 0, 0), 3}, {Vec3(1, 0, 1), 2}, {Vec3(2, 1, 0), 1}, {Vec3(0, 2, 1), 1.5}};
  auto t = tree_of(4, 0, {{0, 1}, {1, 2}, {1, 3}});
  SymmetryClusters clusters{{{0}, {1}, {2, 3}}, 0.1};
  RewardConfig cfg;
  double base = reward(t, g, nodes, clusters, cfg).total;
  std::vector<int> perm{2, 0, 3, 1};  // old id -> new id
  ConnectionGraph pg(4);
  for (const auto& e : g.edges()) pg.add_edge({perm[e.u], perm[e.v], e.distance, e.strength, false});
  std::vector<NodeInfo> pn(4);
  for (int i = 0; i < 4; ++i) pn[perm[i]] = nodes[i];
  KinematicTree pt(4, perm[0]);
  for (const auto& e : t.edges()) pt.add_edge({perm[e.parent], perm[e.child], {}, false});
  SymmetryClusters pc{{{perm[0]}, {perm[1]}, {std::min(perm[2], perm[3]), std::max(perm[2], perm[3])}}, 0.1};
  std::sort(pc.clusters.begin(), pc.clusters.end());
  CHECK(reward(pt, pg, pn, pc, cfg).total == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("mcts: tree graph gives its unique orientation") {
  auto g = graph_of(5, {{0, 1}, {1, 2}, {1, 3}, {3, 4}});
  auto nodes = line_nodes(5);
  SearchConfig sc;
  sc.max_iterations = 50;
  auto r = mcts_search(g, 1, nodes, SymmetryClusters::singletons(5), RewardConfig{}, sc);
  CHECK(edge_set(r.tree) == std::set<std::pair<int, int>>{{1, 0}, {1, 2}, {1, 3}, {3, 4}});
}

TEST_CASE("mcts: four-node cycle matches exhaustive enumeration") {
  auto g = graph_of(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {1, 3}});
  ConnectionGraph gs(4);
  double s[] = {1.0, 0.3, 0.8, 0.6, 0.2};
  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    const auto& e = g.edges()[i];
    gs.add_edge({e.u, e.v, 0.0, s[i], false});
  }
  std::vector<NodeInfo> nodes{{Vec3(0, 0, 0), 4}, {Vec3(1, 0, 0.3), 1}, {Vec3(1, 1, 0), 2}, {Vec3(0, 1, -0.2), 1.5}};
  auto clusters = SymmetryClusters::singletons(4);
  RewardConfig rc;
  SearchConfig sc;
  sc.max_iterations = 500;
  PartId base = select_base(gs);
  auto r = mcts_search(gs, base, nodes, clusters, rc, sc);
  double best = brute_force_max(gs, base, nodes, clusters, rc);
  CHECK(r.reward.total == doctest::Approx(best).epsilon(1e-12));
  CHECK(reward(r.tree, gs, nodes, clusters, rc).total == doctest::Approx(r.reward.total));
  CHECK(enumerate_arborescences(gs, base, clusters).size() > 3);
}

TEST_CASE("mcts: identical legs are both parented to the torso") {
  // Torso 0, legs 1 and 2 with a spurious leg-leg contact.
  auto g = graph_of(3, {{0, 1}, {0, 2}, {1, 2}});
  std::vector<NodeInfo> nodes{{Vec3(0, 0, 1), 4}, {Vec3(-0.5, 0, 0), 1}, {Vec3(0.5, 0, 0), 1}};
  SymmetryClusters clusters{{{0}, {1, 2}}, 0.01};
  SearchConfig sc;
  sc.max_iterations = 200;
  auto r = mcts_search(g, 0, nodes, clusters, RewardConfig{}, sc);
  CHECK(r.tree.parent(1) == 0);
  CHECK(r.tree.parent(2) == 0);
  auto all = enumerate_arborescences(g, 0, clusters);
  CHECK(all.size() == 1);
}

TEST_CASE("mcts: infeasible constraints fail the search") {
  // Only leg-leg edges connect the second leg.
  auto g = graph_of(3, {{0, 1}, {1, 2}});
  SymmetryClusters clusters{{{0}, {1, 2}}, 0.01};
  SearchConfig sc;
  sc.max_iterations = 20;
  try {
    mcts_search(g, 0, line_nodes(3), clusters, RewardConfig{}, sc);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SearchFailed);
  }
}

TEST_CASE("mcts: deterministic per seed") {
  auto g = graph_of(6, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}, {1, 4}, {4, 5}, {0, 5}});
  Rng rng(77);
  std::vector<NodeInfo> nodes;
  for (int i = 0; i < 6; ++i) nodes.push_back({Vec3(rng.normal(), rng.normal(), rng.normal()), rng.uniform(0.5, 3)});
  SearchConfig sc;
  sc.max_iterations = 300;
  sc.seed = 5;
  auto a = mcts_search(g, 0, nodes, SymmetryClusters::singletons(6), RewardConfig{}, sc);
  auto b = mcts_search(g, 0, nodes, SymmetryClusters::singletons(6), RewardConfig{}, sc);
  CHECK(tree_to_json(a.tree, &a.reward).dump() == tree_to_json(b.tree, &b.reward).dump());
}

TEST_CASE("mcts reaches the exhaustive optimum on small graphs") {
  // Random graphs with at most 7 nodes; at least 95% of 50 seeded runs must
  // reach the brute-force maximum.
  int hits = 0, runs = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(1000 + trial);
    int n = 4 + static_cast<int>(rng.index(4));
    ConnectionGraph g(n);
    for (int v = 1; v < n; ++v) {
      int u = static_cast<int>(rng.index(v));
      g.add_edge({u, v, 0.0, rng.uniform(0.1, 1.0), false});
    }
    for (int extra = 0; extra < n / 2; ++extra) {
      int u = static_cast<int>(rng.index(n)), v = static_cast<int>(rng.index(n));
      if (u != v && !g.has_edge(u, v)) g.add_edge({u, v, 0.0, rng.uniform(0.1, 1.0), false});
    }
    std::vector<NodeInfo> nodes;
    for (int i = 0; i < n; ++i)
      nodes.push_back({Vec3(rng.normal(), rng.normal(), rng.normal()), rng.uniform(0.2, 4.0)});
    auto clusters = SymmetryClusters::singletons(n);
    RewardConfig rc;
    SearchConfig sc;
    sc.max_iterations = 2000;
    sc.seed = static_cast<std::uint64_t>(trial);
    PartId base = select_base(g);
    auto r = mcts_search(g, base, nodes, clusters, rc, sc);
    r.tree.validate_spanning();
    double best = brute_force_max(g, base, nodes, clusters, rc);
    ++runs;
    if (r.reward.total >= (1 - 1e-9) * best) ++hits;
  }
  CHECK(hits >= 0.95 * runs);
}

TEST_CASE("tree json round trip") {
  auto t = tree_of(3, 0, {{0, 1}, {1, 2}});
  t.edge_to(2)->joint.type = JointType::Revolute;
  t.edge_to(2)->joint.axis = Vec3(0, 0, 1);
  t.edge_to(2)->joint.pivot = Vec3(1, 2, 3);
  RewardBreakdown rb;
  rb.total = 3.5;
  auto j = tree_to_json(t, &rb);
  CHECK(j["reward_breakdown"]["total"] == 3.5);
  CHECK(j["edges"][1]["joint_type"] == "revolute");
  auto back = tree_from_json(j);
  CHECK(tree_to_json(back, &rb).dump() == j.dump());
  CHECK_THROWS_AS(tree_from_json(nlohmann::json{{"root", 0}}), Error);
}

TEST_CASE("config validation") {
  RewardConfig rc;
  rc.weights = {0, 0, 0, 0, 0};
  CHECK_THROWS_AS(rc.validate(), Error);
  SearchConfig sc;
  sc.max_iterations = 0;
  CHECK_THROWS_AS(sc.validate(), Error);
}
