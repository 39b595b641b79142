#include "kintree/kinematics.hpp"

#include "kintree/error.hpp"

#include <algorithm>
#include <deque>

namespace kintree {

std::string_view to_string(JointType t) {
  switch (t) {
    case JointType::Fixed: return "fixed";
    case JointType::Revolute: return "revolute";
    case JointType::Prismatic: return "prismatic";
  }
  return "fixed";
}

JointType joint_type_from_string(std::string_view s) {
  if (s == "fixed") return JointType::Fixed;
  if (s == "revolute" || s == "continuous") return JointType::Revolute;
  if (s == "prismatic") return JointType::Prismatic;
  throw Error(ErrorCode::ParseError, "unknown joint type '" + std::string(s) + "'");
}

void JointSpec::normalize() {
  switch (type) {
    case JointType::Fixed:
      axis.reset();
      pivot.reset();
      break;
    case JointType::Prismatic:
      pivot.reset();
      if (!axis) throw Error(ErrorCode::InvalidTree, "prismatic joint without axis");
      break;
    case JointType::Revolute:
      if (!axis || !pivot) throw Error(ErrorCode::InvalidTree, "revolute joint needs axis and pivot");
      break;
  }
  if (axis) {
    double n = axis->norm();
    if (!(n > 1e-12)) throw Error(ErrorCode::InvalidTree, "zero joint axis");
    *axis /= n;
  }
}

KinematicTree::KinematicTree(std::size_t node_count, PartId root)
    : root_(root), parent_(node_count, -1) {
  if (root < 0 || static_cast<std::size_t>(root) >= node_count)
    throw Error(ErrorCode::InvalidTree, "root out of range");
}

void KinematicTree::add_edge(TreeEdge e) {
  const auto n = static_cast<PartId>(parent_.size());
  if (e.parent < 0 || e.parent >= n || e.child < 0 || e.child >= n)
    throw Error(ErrorCode::InvalidTree, "edge references unknown node");
  if (e.child == root_ || parent_[e.child] >= 0)
    throw Error(ErrorCode::NonTreeStructure, "node " + std::to_string(e.child) + " already has a parent");
  if (e.parent == e.child) throw Error(ErrorCode::InvalidTree, "self-loop");
  parent_[e.child] = e.parent;
  edges_.push_back(std::move(e));
}

std::vector<PartId> KinematicTree::children(PartId n) const {
  std::vector<PartId> out;
  for (const auto& e : edges_)
    if (e.parent == n) out.push_back(e.child);
  std::sort(out.begin(), out.end());
  return out;
}

const TreeEdge* KinematicTree::edge_to(PartId child) const {
  for (const auto& e : edges_)
    if (e.child == child) return &e;
  return nullptr;
}

TreeEdge* KinematicTree::edge_to(PartId child) {
  for (auto& e : edges_)
    if (e.child == child) return &e;
  return nullptr;
}

std::vector<PartId> KinematicTree::bfs_order() const {
  std::vector<std::vector<PartId>> kids(node_count());
  for (const auto& e : edges_) kids[e.parent].push_back(e.child);
  for (auto& k : kids) std::sort(k.begin(), k.end());
  std::vector<PartId> order;
  std::vector<char> seen(node_count(), 0);
  std::deque<PartId> queue{root_};
  seen[root_] = 1;
  while (!queue.empty()) {
    PartId u = queue.front();
    queue.pop_front();
    order.push_back(u);
    for (PartId v : kids[u])
      if (!seen[v]) {
        seen[v] = 1;
        queue.push_back(v);
      }
  }
  return order;
}

std::vector<int> KinematicTree::depths() const {
  std::vector<int> d(node_count(), -1);
  d[root_] = 0;
  for (PartId u : bfs_order())
    if (u != root_) d[u] = d[parent_[u]] + 1;
  return d;
}

std::vector<int> KinematicTree::out_degrees() const {
  std::vector<int> deg(node_count(), 0);
  for (const auto& e : edges_) ++deg[e.parent];
  return deg;
}

void KinematicTree::validate_spanning() const {
  if (!is_spanning()) throw Error(ErrorCode::InvalidTree, "tree does not span all nodes");
  if (bfs_order().size() != node_count()) throw Error(ErrorCode::InvalidTree, "tree has unreachable nodes");
}

std::vector<NodeInfo> node_infos(std::span<const PartRecord> parts) {
  std::vector<NodeInfo> out;
  out.reserve(parts.size());
  for (const auto& p : parts) out.push_back({p.centroid, p.robust_volume});
  return out;
}

SubtreeMass subtree_mass(const KinematicTree& tree, std::span<const NodeInfo> nodes, double density) {
  const std::size_t n = tree.node_count();
  SubtreeMass s;
  s.mass.assign(n, 0.0);
  s.center.assign(n, Vec3::Zero());
  std::vector<Vec3> moment(n, Vec3::Zero());
  auto order = tree.bfs_order();
  for (PartId i : order) {
    s.mass[i] = density * nodes[i].volume;
    moment[i] = s.mass[i] * nodes[i].centroid;
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    PartId i = *it;
    s.center[i] = moment[i] / s.mass[i];
    PartId p = tree.parent(i);
    if (p >= 0) {
      s.mass[p] += s.mass[i];
      moment[p] += s.mass[i] * s.center[i];
    }
  }
  return s;
}

}  // namespace kintree
