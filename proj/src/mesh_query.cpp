#include "kintree/mesh_query.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace kintree {

namespace {

std::uint64_t undirected_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

double box_distance_sq(const Aabb& box, const Vec3& p) {
  Vec3 d = (box.min - p).cwiseMax(p - box.max).cwiseMax(Vec3::Zero());
  return d.squaredNorm();
}

constexpr int kLeafSize = 4;

}  // namespace

MeshQuery::MeshQuery(const TriangleMesh& mesh, double accuracy) : mesh_(mesh), accuracy_(accuracy) {
  const std::size_t nf = mesh_.faces.size();
  face_centroids_.resize(nf);
  face_normals_.resize(nf);
  face_areas_.resize(nf);
  vertex_normals_.assign(mesh_.vertices.size(), Vec3::Zero());
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& t = mesh_.faces[f];
    const Vec3& a = mesh_.vertices[t[0]];
    const Vec3& b = mesh_.vertices[t[1]];
    const Vec3& c = mesh_.vertices[t[2]];
    face_centroids_[f] = (a + b + c) / 3.0;
    Vec3 n = (b - a).cross(c - a);
    double len = n.norm();
    face_areas_[f] = 0.5 * len;
    face_normals_[f] = len > 0 ? Vec3(n / len) : Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      const Vec3& p0 = mesh_.vertices[t[k]];
      Vec3 e1 = mesh_.vertices[t[(k + 1) % 3]] - p0;
      Vec3 e2 = mesh_.vertices[t[(k + 2) % 3]] - p0;
      double denom = e1.norm() * e2.norm();
      double angle = denom > 0 ? std::acos(std::clamp(e1.dot(e2) / denom, -1.0, 1.0)) : 0.0;
      vertex_normals_[t[k]] += angle * face_normals_[f];
      edge_normals_[undirected_key(t[k], t[(k + 1) % 3])] += face_normals_[f];
    }
  }
  order_.resize(nf);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * nf / kLeafSize + 2);
  if (nf > 0) build(0, static_cast<int>(nf));
}

int MeshQuery::build(int begin, int end) {
  int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  Aabb centroid_box;
  double area = 0.0;
  Vec3 weighted = Vec3::Zero();
  for (int i = begin; i < end; ++i) {
    int f = order_[i];
    for (int k : mesh_.faces[f]) node.box.extend(mesh_.vertices[k]);
    centroid_box.extend(face_centroids_[f]);
    area += face_areas_[f];
    weighted += face_areas_[f] * face_centroids_[f];
    node.dipole += face_areas_[f] * face_normals_[f];
  }
  node.dipole_center = area > 0 ? Vec3(weighted / area) : node.box.center();
  for (int i = 0; i < 8; ++i) {
    Vec3 corner((i & 1) ? node.box.max.x() : node.box.min.x(),
                (i & 2) ? node.box.max.y() : node.box.min.y(),
                (i & 4) ? node.box.max.z() : node.box.min.z());
    node.radius = std::max(node.radius, (corner - node.dipole_center).norm());
  }
  if (end - begin > kLeafSize) {
    int axis = 0;
    centroid_box.extents().maxCoeff(&axis);
    int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                       if (face_centroids_[a][axis] != face_centroids_[b][axis])
                         return face_centroids_[a][axis] < face_centroids_[b][axis];
                       return a < b;
                     });
    node.left = build(begin, mid);
    node.right = build(mid, end);
  }
  nodes_[index] = node;
  return index;
}

MeshQuery::Closest MeshQuery::closest(const Vec3& p) const {
  Closest best;
  best.distance = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return best;
  double best_sq = std::numeric_limits<double>::infinity();
  std::vector<int> stack;
  stack.reserve(64);
  stack.push_back(0);
  while (!stack.empty()) {
    int ni = stack.back();
    stack.pop_back();
    const Node& node = nodes_[ni];
    if (box_distance_sq(node.box, p) >= best_sq) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        int f = order_[i];
        const auto& t = mesh_.faces[f];
        Vec3 q;
        double d = point_triangle_distance_sq(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                              mesh_.vertices[t[2]], &q);
        if (d < best_sq || (d == best_sq && f < best.face)) {
          best_sq = d;
          best.point = q;
          best.face = f;
        }
      }
      continue;
    }
    double dl = box_distance_sq(nodes_[node.left].box, p);
    double dr = box_distance_sq(nodes_[node.right].box, p);
    // Push the farther child first so the nearer one is visited next.
    if (dl < dr) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

double MeshQuery::winding_number(const Vec3& p) const {
  if (nodes_.empty()) return 0.0;
  double omega = 0.0;
  std::vector<int> stack;
  stack.reserve(64);
  stack.push_back(0);
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    Vec3 r = node.dipole_center - p;
    double dist = r.norm();
    if (dist > accuracy_ * node.radius && node.radius > 0) {
      omega += node.dipole.dot(r) / (dist * dist * dist);
      continue;
    }
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const auto& t = mesh_.faces[order_[i]];
        omega += triangle_solid_angle(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                      mesh_.vertices[t[2]]);
      }
      continue;
    }
    stack.push_back(node.left);
    stack.push_back(node.right);
  }
  return omega / (4.0 * std::numbers::pi);
}

double MeshQuery::feature_sign(const Vec3& p, const Closest& c) const {
  const auto& t = mesh_.faces[c.face];
  const Vec3& a = mesh_.vertices[t[0]];
  const Vec3& b = mesh_.vertices[t[1]];
  const Vec3& cc = mesh_.vertices[t[2]];
  const double scale = std::max({(b - a).norm(), (cc - a).norm(), (cc - b).norm()});
  const double tol = 1e-9 * std::max(scale, 1e-12);
  Vec3 normal = face_normals_[c.face];
  bool found = false;
  for (int k = 0; k < 3 && !found; ++k) {
    if ((mesh_.vertices[t[k]] - c.point).norm() <= tol) {
      normal = vertex_normals_[t[k]];
      found = true;
    }
  }
  for (int k = 0; k < 3 && !found; ++k) {
    const Vec3& e0 = mesh_.vertices[t[k]];
    const Vec3& e1 = mesh_.vertices[t[(k + 1) % 3]];
    Vec3 e = e1 - e0;
    double len2 = e.squaredNorm();
    if (len2 <= 0) continue;
    double s = std::clamp((c.point - e0).dot(e) / len2, 0.0, 1.0);
    if ((e0 + s * e - c.point).norm() <= tol) {
      auto it = edge_normals_.find(undirected_key(t[k], t[(k + 1) % 3]));
      if (it != edge_normals_.end()) normal = it->second;
      found = true;
    }
  }
  return (p - c.point).dot(normal) < 0 ? -1.0 : 1.0;
}

double MeshQuery::pseudo_normal_sign(const Vec3& p) const {
  Closest c = closest(p);
  if (c.face < 0) return 1.0;
  return feature_sign(p, c);
}

}  // namespace kintree
