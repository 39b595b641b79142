#pragma once

#include "kintree/mesh.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace kintree {

using PartId = int;

/// Rigid transform as rotation + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

struct PartStats {
  Vec3 centroid = Vec3::Zero();  // area-weighted surface centroid
  double robust_volume = 0.0;
  Vec3 aabb_extents = Vec3::Zero();
  bool watertight = false;
};

struct PartRecord {
  PartId id = 0;
  std::string name;
  TriangleMesh mesh;
  RigidTransform world_transform;
  Mat3 intrinsic_rotation = Mat3::Identity();  // stored, not consumed downstream
  Vec3 centroid = Vec3::Zero();
  double robust_volume = 0.0;
  Vec3 aabb_extents = Vec3::Zero();
  std::filesystem::path source;
};

enum class RejectReason { TooFewVertices, DegenerateSpread, InvalidFaces };
const char* to_string(RejectReason r);

struct PartRejection {
  RejectReason reason;
  std::string detail;
};

struct ValidationLimits {
  std::size_t min_vertices = 10;
  double min_spread = 1e-3;  // relative to the largest AABB extent
};

using ValidationResult = std::variant<PartRecord, PartRejection>;

ValidationResult validate_part(TriangleMesh mesh, PartId id, const ValidationLimits& limits = {});

/// Signed-tetrahedron volume for closed meshes, voxel-occupancy fallback otherwise.
PartStats part_stats(const TriangleMesh& mesh);

double signed_volume(const TriangleMesh& mesh);
/// Occupancy volume: cells whose centers have generalized winding number > 0.5,
/// on a grid with `resolution` cells along the longest extent.
double voxel_volume(const TriangleMesh& mesh, int resolution = 64);

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);
/// Surface samples of the part, translated so their centroid sits at the origin.
std::vector<Vec3> centered_surface_samples(const TriangleMesh& mesh, std::size_t count,
                                           std::uint64_t seed);

struct SymmetryClusters {
  std::vector<std::vector<PartId>> clusters;  // sorted, each cluster sorted
  double chamfer_threshold = 0.0;

  /// Index of the cluster containing `id`.
  std::size_t cluster_of(PartId id) const;
  bool same_multi_member_cluster(PartId a, PartId b) const;
  static SymmetryClusters singletons(std::size_t n);
};

struct SymmetryOptions {
  std::size_t samples = 2048;
  std::uint64_t seed = 0x5eed;
};

SymmetryClusters cluster_symmetric_parts(std::span<const PartRecord> parts, double threshold,
                                         const SymmetryOptions& options = {});
/// Single-linkage clustering on a precomputed symmetric distance matrix.
SymmetryClusters cluster_from_distances(const std::vector<std::vector<double>>& distances,
                                        double threshold);

// ---------------------------------------------------------------------------
// Manifest

struct GroundTruthJoint {
  PartId parent = 0;
  PartId child = 0;
  std::string type = "fixed";
  std::optional<Vec3> axis;
  std::optional<Vec3> pivot;
  Vec3 origin = Vec3::Zero();
};

struct GroundTruth {
  PartId root = 0;
  std::vector<GroundTruthJoint> edges;
};

struct ManifestPart {
  std::filesystem::path mesh;
  std::optional<std::string> name;
};

struct AssemblyManifest {
  std::vector<ManifestPart> parts;
  double units_scale = 1.0;
  std::optional<GroundTruth> ground_truth;
  std::filesystem::path base_dir;  // mesh paths are resolved relative to this
};

AssemblyManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir);
AssemblyManifest load_manifest(const std::filesystem::path& path);
nlohmann::json manifest_to_json(const AssemblyManifest& manifest);

struct LoadedAssembly {
  std::vector<PartRecord> parts;
  Aabb bounds;
  double diagonal() const { return bounds.diagonal(); }
};

/// Loads, scales and validates every part; a rejected or unreadable part is an error.
LoadedAssembly load_assembly(const AssemblyManifest& manifest, const ValidationLimits& limits = {});
/// Builds part records for in-memory meshes (used by synthetic fixtures and tests).
LoadedAssembly make_assembly(std::vector<TriangleMesh> meshes, std::vector<std::string> names = {},
                             const ValidationLimits& limits = {});

}  // namespace kintree
