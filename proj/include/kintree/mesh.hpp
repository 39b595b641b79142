#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace kintree {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& o) {
    min = min.cwiseMin(o.min);
    max = max.cwiseMax(o.max);
  }
  bool empty() const { return (max.array() < min.array()).any(); }
  Vec3 extents() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return empty() ? 0.0 : extents().norm(); }
};

using Face = std::array<int, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  Aabb bounds() const;
  double surface_area() const;
  Vec3 face_normal(std::size_t f) const;  // unnormalized, length = 2*area
  /// True when every undirected edge is shared by exactly two faces with
  /// opposite orientation.
  bool is_closed_manifold() const;
  std::size_t boundary_edge_count() const;
  TriangleMesh translated(const Vec3& t) const;
};

/// Deterministic source of uniform and normal doubles. Portable across standard
/// library implementations (the std:: distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  double uniform();  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  Vec3 unit_vector();
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;  // unit face normal
  int face;
};

/// Area-weighted uniform samples on the surface. Identical meshes with the
/// same seed produce identical sample sequences.
std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, std::size_t count,
                                          std::uint64_t seed);
std::vector<Vec3> sample_surface_points(const TriangleMesh& mesh, std::size_t count,
                                        std::uint64_t seed);

double point_triangle_distance_sq(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                                  Vec3* closest = nullptr);
/// Signed solid angle of triangle (a,b,c) seen from p (Van Oosterom-Strackee).
double triangle_solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

double distance_to_mesh_brute_force(const TriangleMesh& mesh, const Vec3& p);
double winding_number_brute_force(const TriangleMesh& mesh, const Vec3& p);

TriangleMesh load_mesh(const std::filesystem::path& path);  // .obj or binary .ply
TriangleMesh load_obj(const std::filesystem::path& path);
TriangleMesh load_ply(const std::filesystem::path& path);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
void save_ply(const TriangleMesh& mesh, const std::filesystem::path& path);

// Procedural primitives. All are closed, outward-oriented.
/// Axis-aligned box; each face is split into divisions x divisions quads.
TriangleMesh make_box(const Vec3& min, const Vec3& max, int divisions = 2);
TriangleMesh make_cylinder(const Vec3& base_center, double radius, double height, int segments,
                           int axis = 2);
TriangleMesh make_tube(const Vec3& base_center, double inner_radius, double outer_radius,
                       double height, int segments, int axis = 2);
TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions);
TriangleMesh merge_meshes(std::span<const TriangleMesh> meshes);

}  // namespace kintree
