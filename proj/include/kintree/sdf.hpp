#pragma once

#include "kintree/mesh.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace kintree {

struct SdfOptions {
  int resolution = 96;         // cells along the longest padded axis
  double padding_rel = 0.1;    // margin around the AABB, relative to its diagonal
  int min_cells_per_axis = 16;
};

/// Signed distance field sampled on a regular grid and evaluated by trilinear
/// interpolation. Negative inside, positive outside. Immutable after build.
class SdfField {
 public:
  SdfField() = default;
  SdfField(Vec3 origin, double cell_size, std::array<int, 3> nodes, double padding,
           std::vector<float> values);

  const Vec3& origin() const { return origin_; }
  double cell_size() const { return cell_; }
  const std::array<int, 3>& nodes() const { return nodes_; }  // grid nodes per axis
  double padding() const { return padding_; }
  const std::vector<float>& values() const { return values_; }
  Vec3 upper() const;  // far corner of the grid
  Vec3 node_position(int i, int j, int k) const;
  float node_value(int i, int j, int k) const { return values_[index(i, j, k)]; }

  /// Trilinear value. Points outside the grid are clamped to the box and the
  /// distance to the box is added.
  double value(const Vec3& p) const;
  /// Exact gradient of the interpolant used by value().
  Vec3 gradient(const Vec3& p) const;
  double value_and_gradient(const Vec3& p, Vec3* grad) const;

  std::vector<double> query(std::span<const Vec3> points) const;
  std::vector<Vec3> gradient(std::span<const Vec3> points) const;

  bool operator==(const SdfField&) const = default;

 private:
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * nodes_[1] + j) * nodes_[2] + k;
  }
  double interpolate(const Vec3& p, Vec3* grad) const;

  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  std::array<int, 3> nodes_{0, 0, 0};
  double padding_ = 0.0;
  std::vector<float> values_;
};

/// Builds the field: unsigned distance from a BVH closest-point query, sign from
/// the generalized winding number (> 0.5 is inside). For open meshes, nodes
/// with an ambiguous winding number use the pseudo-normal sign instead.
SdfField build_sdf(const TriangleMesh& mesh, const SdfOptions& options = {});

void save_sdf_cache(const SdfField& field, const std::filesystem::path& path);
SdfField load_sdf_cache(const std::filesystem::path& path);

struct SamplingConfig {
  std::size_t surface_count = 1000;
  std::size_t near_count = 1000;
  std::size_t far_count = 1000;
  double surface_sigma = 0.0;  // Gaussian noise on tier (i)
  double near_band = 0.05;     // tier (ii) offsets drawn from U(-band, band) along the normal
  double padding_rel = 0.1;
  std::uint64_t seed = 7;
};

struct SamplingTiers {
  std::vector<Vec3> surface_points;
  std::vector<Vec3> near_points;
  std::vector<Vec3> far_points;
};

SamplingTiers sample_tiers(const TriangleMesh& mesh, const SamplingConfig& config);

}  // namespace kintree
