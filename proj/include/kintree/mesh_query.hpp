#pragma once

#include "kintree/mesh.hpp"

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace kintree {

/// Bounding-volume hierarchy over a triangle mesh answering closest-point and
/// generalized-winding-number queries. Far clusters are approximated by their
/// dipole moment; clusters closer than `accuracy` times their radius are opened.
class MeshQuery {
 public:
  explicit MeshQuery(const TriangleMesh& mesh, double accuracy = 2.0);

  struct Closest {
    double distance = 0.0;
    Vec3 point = Vec3::Zero();
    int face = -1;
  };

  Closest closest(const Vec3& p) const;
  double winding_number(const Vec3& p) const;
  /// Sign (-1 inside, +1 outside) from the angle-weighted pseudo-normal of the
  /// closest feature. Exact for closed manifolds, a heuristic for open ones.
  double pseudo_normal_sign(const Vec3& p) const;

  const TriangleMesh& mesh() const { return mesh_; }

 private:
  struct Node {
    Aabb box;
    Vec3 dipole_center = Vec3::Zero();
    Vec3 dipole = Vec3::Zero();  // sum of area-weighted normals
    double radius = 0.0;
    int left = -1, right = -1;   // children, -1 for leaves
    int begin = 0, end = 0;      // range into order_
  };

  int build(int begin, int end);
  double feature_sign(const Vec3& p, const Closest& c) const;

  TriangleMesh mesh_;
  double accuracy_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Vec3> face_centroids_;
  std::vector<Vec3> face_normals_;  // unit
  std::vector<double> face_areas_;
  std::vector<Vec3> vertex_normals_;  // angle-weighted pseudo-normals
  std::unordered_map<std::uint64_t, Vec3> edge_normals_;
};

}  // namespace kintree
