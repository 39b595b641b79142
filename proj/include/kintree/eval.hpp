#pragma once

#include "kintree/kinematics.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kintree {

/// arccos(|pred . gt|) in degrees. Throws NonUnitAxis unless both are unit within 1e-6.
double axis_angle_error(const Vec3& pred, const Vec3& gt);

enum class PositionMode { Literal, Line };
/// Literal: |pred - gt|. Line: distance from pred to the line through gt along gt_axis.
double axis_position_error(const Vec3& pred_pivot, const Vec3& gt_pivot, const Vec3& gt_axis, PositionMode mode);

/// Rooted ordered tree with integer labels. children[i] lists node i's children in order.
struct LabeledTree {
  int root = 0;
  std::vector<int> labels;
  std::vector<std::vector<int>> children;

  std::size_t size() const { return labels.size(); }
  /// Tree over part ids with children sorted by label.
  static LabeledTree from(const KinematicTree& tree);
  static LabeledTree from(const GroundTruth& truth, std::size_t node_count);
};

/// Unit-cost ordered tree edit distance (insert, delete, relabel).
int tree_edit_distance(const LabeledTree& a, const LabeledTree& b);
int tree_edit_distance(const KinematicTree& pred, const KinematicTree& gt);

struct JointMetric {
  PartId parent = 0;
  PartId child = 0;
  std::string gt_type;    // empty for unmatched predicted joints
  std::string pred_type;  // empty when the prediction has no such joint
  bool matched = false;
  double angle_deg = 0.0;
  std::optional<double> position;  // literal; absent for prismatic joints
  std::optional<double> position_line;
};

struct MetricsReport {
  std::vector<JointMetric> joints;
  int tree_edit_distance = 0;
  double diagonal = 1.0;
  double mean_angle = 0.0;
  double median_angle = 0.0;
  double mean_position = 0.0;
  double median_position = 0.0;
  double mean_position_line = 0.0;
  double median_position_line = 0.0;

  nlohmann::json to_json() const;
  /// One row per joint plus a summary row.
  std::string to_csv(const std::string& assembly) const;
};

/// Joints are matched by (parent, child). Movable joints present on one side
/// only score 90 degrees and one diagonal of position error.
MetricsReport evaluate(const KinematicTree& pred, const GroundTruth& truth, std::size_t part_count, double diagonal);

/// Suite aggregates: pooled over joints and averaged per assembly.
struct SuiteSummary {
  std::size_t assemblies = 0;
  std::size_t joints = 0;
  double mean_ted = 0.0;
  double per_joint_mean_angle = 0.0;
  double per_joint_mean_position = 0.0;
  double per_object_mean_angle = 0.0;
  double per_object_mean_position = 0.0;

  nlohmann::json to_json() const;
};
SuiteSummary summarize(std::span<const MetricsReport> reports);

double median(std::vector<double> v);

}  // namespace kintree
