#include "kintree/assembly.hpp"

#include "kintree/error.hpp"
#include "kintree/mesh_query.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace kintree {

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::TooFewVertices: return "TooFewVertices";
    case RejectReason::DegenerateSpread: return "DegenerateSpread";
    case RejectReason::InvalidFaces: return "InvalidFaces";
  }
  return "Unknown";
}

ValidationResult validate_part(TriangleMesh mesh, PartId id, const ValidationLimits& limits) {
  const auto nv = static_cast<int>(mesh.vertices.size());
  for (const auto& f : mesh.faces) {
    for (int k : f)
      if (k < 0 || k >= nv)
        return PartRejection{RejectReason::InvalidFaces, "face index out of range"};
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      return PartRejection{RejectReason::InvalidFaces, "face with repeated vertex"};
  }
  if (mesh.faces.empty()) return PartRejection{RejectReason::InvalidFaces, "no faces"};
  if (mesh.vertices.size() < limits.min_vertices)
    return PartRejection{RejectReason::TooFewVertices,
                         std::to_string(mesh.vertices.size()) + " < " +
                             std::to_string(limits.min_vertices)};
  const Vec3 ext = mesh.bounds().extents();
  const double largest = ext.maxCoeff();
  if (largest <= 0.0 || ext.minCoeff() < limits.min_spread * largest)
    return PartRejection{RejectReason::DegenerateSpread, "AABB extent below relative minimum"};

  PartRecord part;
  part.id = id;
  part.name = "part_" + std::to_string(id);
  auto stats = part_stats(mesh);
  part.mesh = std::move(mesh);
  part.centroid = stats.centroid;
  part.robust_volume = stats.robust_volume;
  part.aabb_extents = stats.aabb_extents;
  return part;
}

double signed_volume(const TriangleMesh& mesh) {
  double v = 0.0;
  for (const auto& f : mesh.faces)
    v += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
  return v / 6.0;
}

double voxel_volume(const TriangleMesh& mesh, int resolution) {
  const Aabb box = mesh.bounds();
  const Vec3 ext = box.extents();
  const double cell = ext.maxCoeff() / resolution;
  if (!(cell > 0)) return 0.0;
  Eigen::Vector3i dims;
  for (int a = 0; a < 3; ++a) dims[a] = std::max(1, static_cast<int>(std::ceil(ext[a] / cell - 1e-9)));
  const Vec3 start = box.center() - 0.5 * cell * dims.cast<double>() + Vec3::Constant(0.5 * cell);
  MeshQuery query(mesh);
  std::size_t occupied = 0;
  for (int i = 0; i < dims.x(); ++i)
    for (int j = 0; j < dims.y(); ++j)
      for (int k = 0; k < dims.z(); ++k) {
        Vec3 p = start + cell * Vec3(i, j, k);
        if (query.winding_number(p) > 0.5) ++occupied;
      }
  return static_cast<double>(occupied) * cell * cell * cell;
}

PartStats part_stats(const TriangleMesh& mesh) {
  PartStats s;
  double area = 0.0;
  Vec3 weighted = Vec3::Zero();
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    double a = 0.5 * mesh.face_normal(f).norm();
    area += a;
    weighted += a * (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
  }
  s.centroid = area > 0 ? Vec3(weighted / area) : mesh.bounds().center();
  const Aabb box = mesh.bounds();
  s.aabb_extents = box.extents();
  s.watertight = mesh.is_closed_manifold();
  double volume = s.watertight ? std::abs(signed_volume(mesh)) : 0.0;
  if (!(volume > 0.0)) {
    constexpr int kResolution = 64;
    volume = voxel_volume(mesh, kResolution);
    const double cell = s.aabb_extents.maxCoeff() / kResolution;
    volume = std::max(volume, cell * cell * cell);
  }
  s.robust_volume = volume;
  return s;
}

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyPointSet, "chamfer of empty set");
  auto directed = [](std::span<const Vec3> from, std::span<const Vec3> to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return directed(a, b) + directed(b, a);
}

std::vector<Vec3> centered_surface_samples(const TriangleMesh& mesh, std::size_t count,
                                           std::uint64_t seed) {
  auto pts = sample_surface_points(mesh, count, seed);
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  for (auto& p : pts) p -= c;
  return pts;
}

std::size_t SymmetryClusters::cluster_of(PartId id) const {
  for (std::size_t k = 0; k < clusters.size(); ++k)
    if (std::binary_search(clusters[k].begin(), clusters[k].end(), id)) return k;
  throw Error(ErrorCode::InvalidInput, "part " + std::to_string(id) + " not clustered");
}

bool SymmetryClusters::same_multi_member_cluster(PartId a, PartId b) const {
  std::size_t k = cluster_of(a);
  return clusters[k].size() > 1 && std::binary_search(clusters[k].begin(), clusters[k].end(), b);
}

SymmetryClusters SymmetryClusters::singletons(std::size_t n) {
  SymmetryClusters s;
  for (std::size_t i = 0; i < n; ++i) s.clusters.push_back({static_cast<PartId>(i)});
  return s;
}

SymmetryClusters cluster_from_distances(const std::vector<std::vector<double>>& d,
                                        double threshold) {
  const std::size_t n = d.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (d[i][j] <= threshold) {
        auto ri = find(i), rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
  SymmetryClusters out;
  out.chamfer_threshold = threshold;
  std::vector<int> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(out.clusters.size());
      out.clusters.emplace_back();
    }
    out.clusters[slot[r]].push_back(static_cast<PartId>(i));
  }
  return out;
}

SymmetryClusters cluster_symmetric_parts(std::span<const PartRecord> parts, double threshold,
                                         const SymmetryOptions& options) {
  std::vector<std::vector<Vec3>> samples;
  samples.reserve(parts.size());
  for (const auto& p : parts)
    samples.push_back(centered_surface_samples(p.mesh, options.samples, options.seed));
  const std::size_t n = parts.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i][j] = d[j][i] = chamfer_distance(samples[i], samples[j]);
    }
  return cluster_from_distances(d, threshold);
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

Vec3 vec_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw Error(ErrorCode::ParseError, std::string(what) + " must be a 3-array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void require_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                  const char* where) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) throw Error(ErrorCode::ParseError, std::string("unknown key '") + key + "' in " + where);
  }
}

}  // namespace

AssemblyManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  AssemblyManifest m;
  m.base_dir = base_dir;
  try {
    require_keys(j, {"parts", "units_scale", "ground_truth"}, "manifest");
    for (const auto& p : j.at("parts")) {
      require_keys(p, {"mesh", "name"}, "manifest part");
      ManifestPart part;
      part.mesh = p.at("mesh").get<std::string>();
      if (p.contains("name")) part.name = p.at("name").get<std::string>();
      m.parts.push_back(part);
    }
    m.units_scale = j.value("units_scale", 1.0);
    if (!(m.units_scale > 0)) throw Error(ErrorCode::InvalidInput, "units_scale must be > 0");
    if (j.contains("ground_truth")) {
      const auto& g = j.at("ground_truth");
      require_keys(g, {"root", "edges"}, "ground_truth");
      GroundTruth gt;
      gt.root = g.at("root").get<int>();
      for (const auto& e : g.at("edges")) {
        require_keys(e, {"parent", "child", "type", "axis", "pivot", "origin"}, "ground_truth edge");
        GroundTruthJoint joint;
        joint.parent = e.at("parent").get<int>();
        joint.child = e.at("child").get<int>();
        joint.type = e.value("type", std::string("fixed"));
        if (e.contains("axis") && !e.at("axis").is_null()) joint.axis = vec_from_json(e.at("axis"), "axis");
        if (e.contains("pivot") && !e.at("pivot").is_null())
          joint.pivot = vec_from_json(e.at("pivot"), "pivot");
        if (e.contains("origin")) joint.origin = vec_from_json(e.at("origin"), "origin");
        gt.edges.push_back(joint);
      }
      const int n = static_cast<int>(m.parts.size());
      auto valid = [n](int id) { return id >= 0 && id < n; };
      if (!valid(gt.root)) throw Error(ErrorCode::InvalidInput, "ground_truth root out of range");
      for (const auto& e : gt.edges)
        if (!valid(e.parent) || !valid(e.child))
          throw Error(ErrorCode::InvalidInput, "ground_truth edge references undeclared part");
      m.ground_truth = gt;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return m;
}

AssemblyManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return parse_manifest(j, path.parent_path());
}

nlohmann::json manifest_to_json(const AssemblyManifest& m) {
  nlohmann::json j;
  j["parts"] = nlohmann::json::array();
  for (const auto& p : m.parts) {
    nlohmann::json pj;
    pj["mesh"] = p.mesh.generic_string();
    if (p.name) pj["name"] = *p.name;
    j["parts"].push_back(pj);
  }
  j["units_scale"] = m.units_scale;
  if (m.ground_truth) {
    nlohmann::json g;
    g["root"] = m.ground_truth->root;
    g["edges"] = nlohmann::json::array();
    for (const auto& e : m.ground_truth->edges) {
      nlohmann::json ej;
      ej["parent"] = e.parent;
      ej["child"] = e.child;
      ej["type"] = e.type;
      if (e.axis) ej["axis"] = {e.axis->x(), e.axis->y(), e.axis->z()};
      if (e.pivot) ej["pivot"] = {e.pivot->x(), e.pivot->y(), e.pivot->z()};
      ej["origin"] = {e.origin.x(), e.origin.y(), e.origin.z()};
      g["edges"].push_back(ej);
    }
    j["ground_truth"] = g;
  }
  return j;
}

namespace {

LoadedAssembly finish_assembly(std::vector<TriangleMesh> meshes, std::vector<std::string> names,
                               std::vector<std::filesystem::path> sources,
                               const ValidationLimits& limits) {
  LoadedAssembly out;
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    auto result = validate_part(std::move(meshes[i]), static_cast<PartId>(i), limits);
    if (auto* rej = std::get_if<PartRejection>(&result))
      throw Error(ErrorCode::InvalidInput, "part " + std::to_string(i) + " rejected (" +
                                               to_string(rej->reason) + "): " + rej->detail);
    auto part = std::get<PartRecord>(std::move(result));
    if (i < names.size() && !names[i].empty()) part.name = names[i];
    if (i < sources.size()) part.source = sources[i];
    out.bounds.extend(part.mesh.bounds());
    out.parts.push_back(std::move(part));
  }
  return out;
}

}  // namespace

LoadedAssembly load_assembly(const AssemblyManifest& manifest, const ValidationLimits& limits) {
  std::vector<TriangleMesh> meshes;
  std::vector<std::string> names;
  std::vector<std::filesystem::path> sources;
  for (const auto& p : manifest.parts) {
    auto path = p.mesh.is_absolute() ? p.mesh : manifest.base_dir / p.mesh;
    if (!std::filesystem::exists(path))
      throw Error(ErrorCode::IoError, "mesh file not found: " + path.string());
    auto mesh = load_mesh(path);
    if (manifest.units_scale != 1.0)
      for (auto& v : mesh.vertices) v *= manifest.units_scale;
    meshes.push_back(std::move(mesh));
    names.push_back(p.name.value_or(""));
    sources.push_back(path);
  }
  return finish_assembly(std::move(meshes), std::move(names), std::move(sources), limits);
}

LoadedAssembly make_assembly(std::vector<TriangleMesh> meshes, std::vector<std::string> names,
                             const ValidationLimits& limits) {
  return finish_assembly(std::move(meshes), std::move(names), {}, limits);
}

}  // namespace kintree
