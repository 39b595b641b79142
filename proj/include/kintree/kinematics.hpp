#pragma once

#include "kintree/assembly.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kintree {

enum class JointType { Fixed, Revolute, Prismatic };

std::string_view to_string(JointType t);
JointType joint_type_from_string(std::string_view s);

struct JointSpec {
  JointType type = JointType::Fixed;
  Vec3 origin = Vec3::Zero();  // c_child - c_parent
  std::optional<Vec3> axis;    // unit, movable joints only
  std::optional<Vec3> pivot;   // revolute only
  double score = 0.0;

  /// Enforces the per-type field presence rules.
  void normalize();
};

struct TreeEdge {
  PartId parent = 0;
  PartId child = 0;
  JointSpec joint;
  bool is_virtual = false;
};

/// Directed tree over part ids, rooted at `root()`. Edges keep insertion order.
class KinematicTree {
 public:
  KinematicTree() = default;
  KinematicTree(std::size_t node_count, PartId root);

  std::size_t node_count() const { return parent_.size(); }
  PartId root() const { return root_; }
  const std::vector<TreeEdge>& edges() const { return edges_; }
  std::vector<TreeEdge>& edges() { return edges_; }

  void add_edge(TreeEdge e);
  bool contains(PartId n) const { return n == root_ || parent_.at(n) >= 0; }
  PartId parent(PartId n) const { return parent_.at(n); }  // -1 for root / absent
  std::vector<PartId> children(PartId n) const;            // ascending
  const TreeEdge* edge_to(PartId child) const;
  TreeEdge* edge_to(PartId child);
  bool is_spanning() const { return edges_.size() + 1 == node_count(); }
  /// Depth of every node reachable from the root; -1 elsewhere.
  std::vector<int> depths() const;
  std::vector<int> out_degrees() const;
  /// Nodes in BFS order from the root (children ascending).
  std::vector<PartId> bfs_order() const;

  /// Throws InvalidTree unless the edges form an arborescence spanning all nodes.
  void validate_spanning() const;

 private:
  PartId root_ = 0;
  std::vector<PartId> parent_;
  std::vector<TreeEdge> edges_;
};

/// Per-part quantities consumed by the topology search.
struct NodeInfo {
  Vec3 centroid = Vec3::Zero();
  double volume = 1.0;
};

std::vector<NodeInfo> node_infos(std::span<const PartRecord> parts);

/// Subtree masses and centers (mass-weighted) for every node.
struct SubtreeMass {
  std::vector<double> mass;
  std::vector<Vec3> center;
};
SubtreeMass subtree_mass(const KinematicTree& tree, std::span<const NodeInfo> nodes, double density);

}  // namespace kintree
