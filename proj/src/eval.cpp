#include "kintree/eval.hpp"

#include "kintree/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace kintree {

double axis_angle_error(const Vec3& pred, const Vec3& gt) {
  for (const Vec3* a : {&pred, &gt})
    if (!(std::abs(a->norm() - 1.0) <= 1e-6)) throw Error(ErrorCode::NonUnitAxis, "axis is not unit length");
  double c = std::min(1.0, std::abs(pred.dot(gt)));
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double axis_position_error(const Vec3& pred_pivot, const Vec3& gt_pivot, const Vec3& gt_axis, PositionMode mode) {
  const Vec3 d = pred_pivot - gt_pivot;
  if (mode == PositionMode::Literal) return d.norm();
  const double n = gt_axis.norm();
  if (!(n > 1e-12)) throw Error(ErrorCode::DegenerateAxis, "ground-truth axis has zero length");
  const Vec3 u = gt_axis / n;
  return (d - d.dot(u) * u).norm();
}

// ---------------------------------------------------------------------------
// Tree edit distance

namespace {

LabeledTree labeled(std::size_t n, PartId root, const std::vector<std::pair<PartId, PartId>>& edges) {
  std::vector<std::vector<int>> kids(n);
  for (auto [p, c] : edges) kids[p].push_back(c);
  LabeledTree t;
  // Keep only nodes reachable from the root, renumbered in BFS order.
  std::vector<int> order{root}, index(n, -1);
  index[root] = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& k = kids[order[i]];
    std::sort(k.begin(), k.end());
    for (int c : k)
      if (index[c] < 0) {
        index[c] = static_cast<int>(order.size());
        order.push_back(c);
      }
  }
  t.root = 0;
  t.labels = order;
  t.children.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    for (int c : kids[order[i]])
      if (index[c] > static_cast<int>(i)) t.children[i].push_back(index[c]);
  return t;
}

struct Postorder {
  std::vector<int> label;     // 1-based
  std::vector<int> leftmost;  // leftmost leaf descendant, 1-based
  std::vector<int> keyroots;
};

Postorder postorder(const LabeledTree& t) {
  Postorder p;
  p.label.push_back(0);
  p.leftmost.push_back(0);
  std::function<int(int)> visit = [&](int node) {
    int first = -1;
    for (int c : t.children[node]) {
      int l = visit(c);
      if (first < 0) first = l;
    }
    p.label.push_back(t.labels[node]);
    int idx = static_cast<int>(p.label.size()) - 1;
    p.leftmost.push_back(first < 0 ? idx : first);
    return p.leftmost.back();
  };
  if (!t.labels.empty()) visit(t.root);
  const int n = static_cast<int>(p.label.size()) - 1;
  // Keyroots: the highest node for each distinct leftmost leaf.
  std::map<int, int> highest;
  for (int i = 1; i <= n; ++i) highest[p.leftmost[i]] = i;
  for (auto [l, i] : highest) p.keyroots.push_back(i);
  std::sort(p.keyroots.begin(), p.keyroots.end());
  return p;
}

}  // namespace

LabeledTree LabeledTree::from(const KinematicTree& tree) {
  std::vector<std::pair<PartId, PartId>> edges;
  for (const auto& e : tree.edges()) edges.emplace_back(e.parent, e.child);
  return labeled(tree.node_count(), tree.root(), edges);
}

LabeledTree LabeledTree::from(const GroundTruth& truth, std::size_t node_count) {
  std::vector<std::pair<PartId, PartId>> edges;
  auto check = [&](PartId id) {
    if (id < 0 || static_cast<std::size_t>(id) >= node_count)
      throw Error(ErrorCode::CorrespondenceMissing, "ground truth references part " + std::to_string(id) +
                                                        " but the assembly has " + std::to_string(node_count));
  };
  check(truth.root);
  for (const auto& e : truth.edges) {
    check(e.parent);
    check(e.child);
    edges.emplace_back(e.parent, e.child);
  }
  return labeled(node_count, truth.root, edges);
}

int tree_edit_distance(const LabeledTree& a, const LabeledTree& b) {
  const Postorder pa = postorder(a), pb = postorder(b);
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  if (n == 0 || m == 0) return n + m;
  std::vector<std::vector<int>> td(n + 1, std::vector<int>(m + 1, 0));
  std::vector<std::vector<int>> fd(n + 2, std::vector<int>(m + 2, 0));
  for (int i : pa.keyroots)
    for (int j : pb.keyroots) {
      const int li = pa.leftmost[i], lj = pb.leftmost[j];
      // fd indices are offset so that li-1 and lj-1 map to 0.
      fd[0][0] = 0;
      for (int x = li; x <= i; ++x) fd[x - li + 1][0] = fd[x - li][0] + 1;
      for (int y = lj; y <= j; ++y) fd[0][y - lj + 1] = fd[0][y - lj] + 1;
      for (int x = li; x <= i; ++x)
        for (int y = lj; y <= j; ++y) {
          const int X = x - li + 1, Y = y - lj + 1;
          const int del = fd[X - 1][Y] + 1, ins = fd[X][Y - 1] + 1;
          if (pa.leftmost[x] == li && pb.leftmost[y] == lj) {
            const int rel = fd[X - 1][Y - 1] + (pa.label[x] == pb.label[y] ? 0 : 1);
            fd[X][Y] = std::min({del, ins, rel});
            td[x][y] = fd[X][Y];
          } else {
            const int sub = fd[pa.leftmost[x] - li][pb.leftmost[y] - lj] + td[x][y];
            fd[X][Y] = std::min({del, ins, sub});
          }
        }
    }
  return td[n][m];
}

int tree_edit_distance(const KinematicTree& pred, const KinematicTree& gt) {
  return tree_edit_distance(LabeledTree::from(pred), LabeledTree::from(gt));
}

// ---------------------------------------------------------------------------
// Reports

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

namespace {

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

bool movable(JointType t) { return t != JointType::Fixed; }

}  // namespace

MetricsReport evaluate(const KinematicTree& pred, const GroundTruth& truth, std::size_t part_count, double diagonal) {
  if (pred.node_count() != part_count)
    throw Error(ErrorCode::CorrespondenceMissing, "prediction has " + std::to_string(pred.node_count()) +
                                                      " nodes but the assembly has " + std::to_string(part_count));
  const LabeledTree gt_tree = LabeledTree::from(truth, part_count);
  MetricsReport r;
  r.diagonal = diagonal;
  r.tree_edit_distance = tree_edit_distance(LabeledTree::from(pred), gt_tree);

  std::map<std::pair<PartId, PartId>, const TreeEdge*> pred_edges;
  for (const auto& e : pred.edges()) pred_edges[{e.parent, e.child}] = &e;
  std::map<std::pair<PartId, PartId>, bool> gt_movable;

  for (const auto& g : truth.edges) {
    JointType gt_type = joint_type_from_string(g.type);
    gt_movable[{g.parent, g.child}] = movable(gt_type);
    if (!movable(gt_type)) continue;
    if (!g.axis) throw Error(ErrorCode::InvalidInput, "ground-truth movable joint without axis");
    JointMetric m;
    m.parent = g.parent;
    m.child = g.child;
    m.gt_type = g.type;
    const bool revolute = gt_type == JointType::Revolute;
    auto it = pred_edges.find({g.parent, g.child});
    const JointSpec* p = it == pred_edges.end() ? nullptr : &it->second->joint;
    if (p) m.pred_type = std::string(to_string(p->type));
    if (p && movable(p->type) && p->axis) {
      m.matched = true;
      m.angle_deg = axis_angle_error(p->axis->normalized(), g.axis->normalized());
      if (revolute) {
        if (p->pivot && g.pivot) {
          m.position = axis_position_error(*p->pivot, *g.pivot, *g.axis, PositionMode::Literal);
          m.position_line = axis_position_error(*p->pivot, *g.pivot, *g.axis, PositionMode::Line);
        } else {
          m.position = m.position_line = diagonal;
        }
      }
    } else {
      m.angle_deg = 90.0;
      if (revolute) m.position = m.position_line = diagonal;
    }
    r.joints.push_back(m);
  }
  for (const auto& e : pred.edges()) {
    if (!movable(e.joint.type)) continue;
    auto g = gt_movable.find({e.parent, e.child});
    if (g != gt_movable.end() && g->second) continue;
    JointMetric m;
    m.parent = e.parent;
    m.child = e.child;
    m.pred_type = std::string(to_string(e.joint.type));
    m.angle_deg = 90.0;
    if (e.joint.type == JointType::Revolute) m.position = m.position_line = diagonal;
    r.joints.push_back(m);
  }

  std::vector<double> angles, pos, line;
  for (const auto& j : r.joints) {
    angles.push_back(j.angle_deg);
    if (j.position) pos.push_back(*j.position);
    if (j.position_line) line.push_back(*j.position_line);
  }
  r.mean_angle = mean(angles);
  r.median_angle = median(angles);
  r.mean_position = mean(pos);
  r.median_position = median(pos);
  r.mean_position_line = mean(line);
  r.median_position_line = median(line);
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["tree_edit_distance"] = tree_edit_distance;
  j["diagonal"] = diagonal;
  j["joints"] = nlohmann::json::array();
  for (const auto& m : joints) {
    nlohmann::json e{{"parent", m.parent}, {"child", m.child}, {"gt_type", m.gt_type}, {"pred_type", m.pred_type},
                     {"matched", m.matched}, {"axis_angle_error", m.angle_deg}};
    e["axis_position_error"] = m.position ? nlohmann::json(*m.position) : nlohmann::json(nullptr);
    e["axis_line_error"] = m.position_line ? nlohmann::json(*m.position_line) : nlohmann::json(nullptr);
    j["joints"].push_back(e);
  }
  j["aggregate"] = {{"mean_axis_angle_error", mean_angle},
                    {"median_axis_angle_error", median_angle},
                    {"mean_axis_position_error", mean_position},
                    {"median_axis_position_error", median_position},
                    {"mean_axis_line_error", mean_position_line},
                    {"median_axis_line_error", median_position_line}};
  return j;
}

std::string MetricsReport::to_csv(const std::string& assembly) const {
  std::ostringstream out;
  out.precision(17);
  out << "assembly,row,parent,child,gt_type,pred_type,axis_angle_error,axis_position_error,axis_line_error,"
         "tree_edit_distance\n";
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    s.precision(17);
    if (v) s << *v;
    return s.str();
  };
  for (const auto& m : joints)
    out << assembly << ",joint," << m.parent << "," << m.child << "," << m.gt_type << "," << m.pred_type << ","
        << m.angle_deg << "," << opt(m.position) << "," << opt(m.position_line) << ",\n";
  out << assembly << ",summary,,,,," << mean_angle << "," << mean_position << "," << mean_position_line << ","
      << tree_edit_distance << "\n";
  return out.str();
}

SuiteSummary summarize(std::span<const MetricsReport> reports) {
  SuiteSummary s;
  s.assemblies = reports.size();
  std::vector<double> angles, pos, obj_angle, obj_pos, ted;
  for (const auto& r : reports) {
    ted.push_back(r.tree_edit_distance);
    for (const auto& j : r.joints) {
      angles.push_back(j.angle_deg);
      if (j.position) pos.push_back(*j.position);
    }
    if (!r.joints.empty()) obj_angle.push_back(r.mean_angle);
    if (std::any_of(r.joints.begin(), r.joints.end(), [](const JointMetric& j) { return j.position.has_value(); }))
      obj_pos.push_back(r.mean_position);
  }
  s.joints = angles.size();
  s.mean_ted = mean(ted);
  s.per_joint_mean_angle = mean(angles);
  s.per_joint_mean_position = mean(pos);
  s.per_object_mean_angle = mean(obj_angle);
  s.per_object_mean_position = mean(obj_pos);
  return s;
}

nlohmann::json SuiteSummary::to_json() const {
  return {{"assemblies", assemblies},
          {"joints", joints},
          {"mean_tree_edit_distance", mean_ted},
          {"per_joint_mean_axis_angle_error", per_joint_mean_angle},
          {"per_joint_mean_axis_position_error", per_joint_mean_position},
          {"per_object_mean_axis_angle_error", per_object_mean_angle},
          {"per_object_mean_axis_position_error", per_object_mean_position}};
}

}  // namespace kintree
