#include "kintree/error.hpp"
#include "kintree/eval.hpp"
#include "kintree/joints.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

using namespace kintree;
using oracle::brute_force_ted;
using oracle::random_tree;

namespace {

GroundTruthJoint gt_revolute(PartId p, PartId c, const Vec3& pivot, const Vec3& axis) {
  GroundTruthJoint g;
  g.parent = p;
  g.child = c;
  g.type = "revolute";
  g.axis = axis;
  g.pivot = pivot;
  return g;
}

/// Ground truth 0 -> 1 (revolute), 1 -> 2 (prismatic).
GroundTruth chain_truth() {
  GroundTruth gt;
  gt.root = 0;
  gt.edges.push_back(gt_revolute(0, 1, Vec3(1, 0, 0), Vec3(0, 0, 1)));
  GroundTruthJoint s;
  s.parent = 1;
  s.child = 2;
  s.type = "prismatic";
  s.axis = Vec3(1, 0, 0);
  gt.edges.push_back(s);
  return gt;
}

KinematicTree tree_from_truth(const GroundTruth& gt, std::size_t n) {
  KinematicTree t(n, gt.root);
  for (const auto& g : gt.edges) {
    TreeEdge e;
    e.parent = g.parent;
    e.child = g.child;
    e.joint.type = joint_type_from_string(g.type);
    e.joint.axis = g.axis;
    e.joint.pivot = g.pivot;
    t.add_edge(e);
  }
  return t;
}

}  // namespace

TEST_CASE("axis angle error") {
  CHECK(axis_angle_error(Vec3(0, 0, 1), Vec3(0, 0, 1)) == doctest::Approx(0.0));
  CHECK(axis_angle_error(Vec3(0, 0, 1), Vec3(0, 0, -1)) == doctest::Approx(0.0));
  CHECK(axis_angle_error(Vec3(1, 0, 1).normalized(), Vec3(0, 0, 1)) == doctest::Approx(45.0));
  CHECK(axis_angle_error(Vec3(1, 0, 0), Vec3(0, 1, 0)) == doctest::Approx(90.0));
  CHECK_THROWS_AS(axis_angle_error(Vec3(0, 0, 2), Vec3(0, 0, 1)), Error);
  try {
    axis_angle_error(Vec3(0, 0, 1), Vec3(0, 1, 1));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonUnitAxis);
  }
}

TEST_CASE("axis position error") {
  const Vec3 z(0, 0, 1);
  CHECK(axis_position_error(Vec3(0.3, 0, 0), Vec3(0, 0, 0), z, PositionMode::Literal) == doctest::Approx(0.3));
  CHECK(axis_position_error(Vec3(0.3, 0, 0), Vec3(0, 0, 0), z, PositionMode::Line) == doctest::Approx(0.3));
  CHECK(axis_position_error(Vec3(0, 0, 0.5), Vec3(0, 0, 0), z, PositionMode::Literal) == doctest::Approx(0.5));
  CHECK(axis_position_error(Vec3(0, 0, 0.5), Vec3(0, 0, 0), z, PositionMode::Line) == doctest::Approx(0.0));
}

TEST_CASE("tree edit distance examples") {
  LabeledTree a{0, {0, 1, 2}, {{1, 2}, {}, {}}};
  CHECK(tree_edit_distance(a, a) == 0);
  LabeledTree b{0, {0, 1, 2, 3}, {{1, 2}, {3}, {}, {}}};
  CHECK(tree_edit_distance(a, b) == 1);
  LabeledTree chain{0, {0, 1, 2}, {{1}, {2}, {}}};
  CHECK(tree_edit_distance(a, chain) == 2);
  LabeledTree empty;
  CHECK(tree_edit_distance(a, empty) == 3);
  LabeledTree relabeled{0, {0, 1, 5}, {{1, 2}, {}, {}}};
  CHECK(tree_edit_distance(a, relabeled) == 1);
}

TEST_CASE("tree edit distance equals the brute-force mapping optimum") {
  Rng rng(20261014);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_tree(rng, 1 + static_cast<int>(rng.index(5)), 3);
    auto b = random_tree(rng, 1 + static_cast<int>(rng.index(5)), 3);
    CAPTURE(trial);
    CHECK(tree_edit_distance(a, b) == brute_force_ted(a, b));
  }
}

TEST_CASE("tree edit distance is a metric") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = random_tree(rng, 1 + static_cast<int>(rng.index(6)), 3);
    auto b = random_tree(rng, 1 + static_cast<int>(rng.index(6)), 3);
    auto c = random_tree(rng, 1 + static_cast<int>(rng.index(6)), 3);
    const int ab = tree_edit_distance(a, b), ba = tree_edit_distance(b, a);
    CHECK(ab == ba);
    CHECK(tree_edit_distance(a, a) == 0);
    CHECK(ab <= tree_edit_distance(a, c) + tree_edit_distance(c, b));
    CHECK(ab <= static_cast<int>(a.size() + b.size()));
  }
}

TEST_CASE("trees over part ids") {
  auto gt = chain_truth();
  auto t = tree_from_truth(gt, 3);
  CHECK(tree_edit_distance(t, t) == 0);
  auto lt = LabeledTree::from(gt, 3);
  CHECK(lt.size() == 3);
  KinematicTree star(3, 0);
  star.add_edge({0, 1, {}, false});
  star.add_edge({0, 2, {}, false});
  CHECK(tree_edit_distance(star, t) == 2);
  // Sibling order never matters: children are sorted by part id.
  KinematicTree star2(3, 0);
  star2.add_edge({0, 2, {}, false});
  star2.add_edge({0, 1, {}, false});
  CHECK(tree_edit_distance(star, star2) == 0);
}

TEST_CASE("perfect prediction scores zero") {
  auto gt = chain_truth();
  auto r = evaluate(tree_from_truth(gt, 3), gt, 3, 2.0);
  CHECK(r.tree_edit_distance == 0);
  REQUIRE(r.joints.size() == 2);
  for (const auto& j : r.joints) {
    CHECK(j.matched);
    CHECK(j.angle_deg == doctest::Approx(0.0));
  }
  CHECK(r.joints[0].position.has_value());
  CHECK_FALSE(r.joints[1].position.has_value());
  CHECK(r.mean_angle == doctest::Approx(0.0));
  CHECK(r.mean_position == doctest::Approx(0.0));
}

TEST_CASE("rotating one axis by 30 degrees") {
  auto gt = chain_truth();
  auto pred = tree_from_truth(gt, 3);
  pred.edges()[0].joint.axis = rodrigues(Vec3(1, 0, 0), std::numbers::pi / 6) * Vec3(0, 0, 1);
  auto r = evaluate(pred, gt, 3, 2.0);
  CHECK(r.joints[0].angle_deg == doctest::Approx(30.0));
  CHECK(r.joints[1].angle_deg == doctest::Approx(0.0));
  CHECK(r.mean_angle == doctest::Approx(15.0));
  CHECK(r.median_angle == doctest::Approx(15.0));
  CHECK(r.tree_edit_distance == 0);
}

TEST_CASE("pivot offsets") {
  auto gt = chain_truth();
  auto pred = tree_from_truth(gt, 3);
  pred.edges()[0].joint.pivot = Vec3(1.3, 0, 0.5);
  auto r = evaluate(pred, gt, 3, 2.0);
  CHECK(*r.joints[0].position == doctest::Approx(std::hypot(0.3, 0.5)));
  CHECK(*r.joints[0].position_line == doctest::Approx(0.3));
}

TEST_CASE("missing and extra joints are penalized") {
  auto gt = chain_truth();
  KinematicTree pred(3, 0);
  TreeEdge a{0, 1, {}, false};
  a.joint.type = JointType::Fixed;
  TreeEdge b{0, 2, {}, false};
  b.joint.type = JointType::Revolute;
  b.joint.axis = Vec3(0, 0, 1);
  b.joint.pivot = Vec3(0, 0, 0);
  pred.add_edge(a);
  pred.add_edge(b);
  auto r = evaluate(pred, gt, 3, 2.0);
  CHECK(r.tree_edit_distance == 2);
  REQUIRE(r.joints.size() == 3);
  for (const auto& j : r.joints) {
    CHECK_FALSE(j.matched);
    CHECK(j.angle_deg == doctest::Approx(90.0));
  }
  CHECK(*r.joints[0].position == doctest::Approx(2.0));
  CHECK_FALSE(r.joints[1].position.has_value());
  CHECK(r.joints[2].gt_type.empty());
  CHECK(*r.joints[2].position == doctest::Approx(2.0));
}

TEST_CASE("correspondence must be complete") {
  auto gt = chain_truth();
  auto check_code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::CorrespondenceMissing);
      return;
    }
    FAIL("expected CorrespondenceMissing");
  };
  check_code([&] { evaluate(tree_from_truth(gt, 3), gt, 4, 1.0); });
  check_code([&] { LabeledTree::from(gt, 2); });
}

TEST_CASE("metrics are invariant under a rigid transform") {
  Rng rng(99);
  auto gt = chain_truth();
  auto pred = tree_from_truth(gt, 3);
  pred.edges()[0].joint.axis = Vec3(0.1, 0.05, 1).normalized();
  pred.edges()[0].joint.pivot = Vec3(1.1, 0.2, 0.3);
  pred.edges()[1].joint.axis = Vec3(1, 0.2, 0).normalized();
  auto base = evaluate(pred, gt, 3, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 R = rodrigues(rng.unit_vector(), rng.uniform(0, std::numbers::pi));
    const Vec3 t = 3.0 * rng.unit_vector();
    auto gt2 = gt;
    for (auto& g : gt2.edges) {
      g.axis = R * *g.axis;
      if (g.pivot) g.pivot = R * *g.pivot + t;
    }
    auto pred2 = pred;
    for (auto& e : pred2.edges()) {
      e.joint.axis = R * *e.joint.axis;
      if (e.joint.pivot) e.joint.pivot = R * *e.joint.pivot + t;
    }
    auto r = evaluate(pred2, gt2, 3, 2.0);
    CHECK(r.mean_angle == doctest::Approx(base.mean_angle).epsilon(1e-9));
    CHECK(r.mean_position == doctest::Approx(base.mean_position).epsilon(1e-9));
    CHECK(r.mean_position_line == doctest::Approx(base.mean_position_line).epsilon(1e-9));
  }
}

TEST_CASE("report serialization") {
  auto gt = chain_truth();
  auto pred = tree_from_truth(gt, 3);
  pred.edges()[0].joint.axis = rodrigues(Vec3(1, 0, 0), std::numbers::pi / 6) * Vec3(0, 0, 1);
  auto r = evaluate(pred, gt, 3, 2.0);
  auto j = r.to_json();
  CHECK(j.at("tree_edit_distance") == 0);
  CHECK(j.at("joints").size() == 2);
  CHECK(j.at("aggregate").at("mean_axis_angle_error").get<double>() == doctest::Approx(15.0));
  CHECK(j.at("joints")[1].at("axis_position_error").is_null());
  const std::string csv = r.to_csv("fixture");
  CHECK(csv.rfind("assembly,row,parent,child,gt_type,pred_type,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("fixture,summary,") != std::string::npos);
}

TEST_CASE("suite summary") {
  auto gt = chain_truth();
  auto good = evaluate(tree_from_truth(gt, 3), gt, 3, 2.0);
  auto pred = tree_from_truth(gt, 3);
  pred.edges()[0].joint.axis = rodrigues(Vec3(1, 0, 0), std::numbers::pi / 6) * Vec3(0, 0, 1);
  pred.edges()[0].joint.pivot = Vec3(1.4, 0, 0);
  auto bad = evaluate(pred, gt, 3, 2.0);
  std::vector<MetricsReport> reports{good, bad};
  auto s = summarize(reports);
  CHECK(s.assemblies == 2);
  CHECK(s.joints == 4);
  CHECK(s.per_joint_mean_angle == doctest::Approx(7.5));
  CHECK(s.per_object_mean_angle == doctest::Approx(7.5));
  CHECK(s.per_joint_mean_position == doctest::Approx(0.2));
  CHECK(s.mean_ted == doctest::Approx(0.0));
  CHECK(median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == doctest::Approx(2.5));
}
