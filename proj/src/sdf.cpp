#include "kintree/sdf.hpp"

#include "kintree/error.hpp"
#include "kintree/mesh_query.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace kintree {

SdfField::SdfField(Vec3 origin, double cell_size, std::array<int, 3> nodes, double padding,
                   std::vector<float> values)
    : origin_(std::move(origin)), cell_(cell_size), nodes_(nodes), padding_(padding),
      values_(std::move(values)) {
  if (!(cell_ > 0)) throw Error(ErrorCode::InvalidInput, "SDF cell size must be positive");
  for (int n : nodes_)
    if (n < 2) throw Error(ErrorCode::InvalidInput, "SDF needs at least 2 nodes per axis");
  if (values_.size() != static_cast<std::size_t>(nodes_[0]) * nodes_[1] * nodes_[2])
    throw Error(ErrorCode::InvalidInput, "SDF value count does not match grid");
}

Vec3 SdfField::upper() const {
  return origin_ + cell_ * Vec3(nodes_[0] - 1, nodes_[1] - 1, nodes_[2] - 1);
}

Vec3 SdfField::node_position(int i, int j, int k) const { return origin_ + cell_ * Vec3(i, j, k); }

double SdfField::interpolate(const Vec3& p, Vec3* grad) const {
  int base[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    double u = (p[a] - origin_[a]) / cell_;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, nodes_[a] - 2);
    base[a] = i;
    t[a] = u - i;
  }
  double c[2][2][2];
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk)
        c[di][dj][dk] = values_[index(base[0] + di, base[1] + dj, base[2] + dk)];
  const double tx = t[0], ty = t[1], tz = t[2];
  // Interpolate along z, then y, then x.
  double cz[2][2];
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj) cz[di][dj] = c[di][dj][0] + tz * (c[di][dj][1] - c[di][dj][0]);
  double cy[2];
  for (int di = 0; di < 2; ++di) cy[di] = cz[di][0] + ty * (cz[di][1] - cz[di][0]);
  const double v = cy[0] + tx * (cy[1] - cy[0]);
  if (grad) {
    const double dx = cy[1] - cy[0];
    double dzy[2];
    for (int di = 0; di < 2; ++di) dzy[di] = cz[di][1] - cz[di][0];
    const double dy = dzy[0] + tx * (dzy[1] - dzy[0]);
    double dz_[2][2];
    for (int di = 0; di < 2; ++di)
      for (int dj = 0; dj < 2; ++dj) dz_[di][dj] = c[di][dj][1] - c[di][dj][0];
    double dzx[2];
    for (int di = 0; di < 2; ++di) dzx[di] = dz_[di][0] + ty * (dz_[di][1] - dz_[di][0]);
    const double dz = dzx[0] + tx * (dzx[1] - dzx[0]);
    *grad = Vec3(dx, dy, dz) / cell_;
  }
  return v;
}

double SdfField::value_and_gradient(const Vec3& p, Vec3* grad) const {
  const Vec3 lo = origin_, hi = upper();
  const Vec3 clamped = p.cwiseMax(lo).cwiseMin(hi);
  const Vec3 outside = p - clamped;
  const double out_dist = outside.norm();
  double v = interpolate(clamped, grad);
  if (out_dist > 0.0) {
    v += out_dist;
    if (grad) {
      for (int a = 0; a < 3; ++a)
        if (outside[a] != 0.0) (*grad)[a] = outside[a] / out_dist;
    }
  }
  return v;
}

double SdfField::value(const Vec3& p) const { return value_and_gradient(p, nullptr); }

Vec3 SdfField::gradient(const Vec3& p) const {
  Vec3 g;
  value_and_gradient(p, &g);
  return g;
}

std::vector<double> SdfField::query(std::span<const Vec3> points) const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(value(p));
  return out;
}

std::vector<Vec3> SdfField::gradient(std::span<const Vec3> points) const {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(gradient(p));
  return out;
}

SdfField build_sdf(const TriangleMesh& mesh, const SdfOptions& options) {
  if (options.resolution < 16) throw Error(ErrorCode::InvalidInput, "SDF resolution must be >= 16");
  if (!(options.padding_rel > 0)) throw Error(ErrorCode::InvalidInput, "SDF padding must be > 0");
  if (!(mesh.surface_area() > 0)) throw Error(ErrorCode::DegenerateMesh, "mesh has zero surface area");

  const Aabb box = mesh.bounds();
  const double padding = options.padding_rel * box.diagonal();
  const Vec3 lo = box.min - Vec3::Constant(padding);
  const Vec3 ext = box.extents() + Vec3::Constant(2.0 * padding);
  const double cell = ext.maxCoeff() / options.resolution;
  std::array<int, 3> nodes;
  Vec3 origin;
  for (int a = 0; a < 3; ++a) {
    int cells = std::max(options.min_cells_per_axis, static_cast<int>(std::ceil(ext[a] / cell - 1e-9)));
    nodes[a] = cells + 1;
    // Center the (possibly enlarged) grid on the padded box.
    origin[a] = lo[a] + 0.5 * (ext[a] - cells * cell);
  }

  MeshQuery query(mesh);
  const bool open = mesh.boundary_edge_count() > 0;
  auto sign_at = [&](const Vec3& p) {
    double w = query.winding_number(p);
    if (open && std::abs(w - 0.5) < 0.25) return query.pseudo_normal_sign(p);
    return w > 0.5 ? -1.0 : 1.0;
  };

  std::vector<float> values(static_cast<std::size_t>(nodes[0]) * nodes[1] * nodes[2]);
  const double half = 0.5 * cell;
  std::size_t idx = 0;
  for (int i = 0; i < nodes[0]; ++i)
    for (int j = 0; j < nodes[1]; ++j) {
      double prev_dist = 0.0, prev_sign = 1.0;
      for (int k = 0; k < nodes[2]; ++k, ++idx) {
        Vec3 p = origin + cell * Vec3(i, j, k);
        double d = query.closest(p).distance;
        double s;
        // The surface cannot cross a segment of length `cell` whose endpoints are
        // both farther than cell/2 from it, so the sign carries over.
        if (k > 0 && prev_dist > half && d > half)
          s = prev_sign;
        else
          s = sign_at(p);
        values[idx] = static_cast<float>(s * d);
        prev_dist = d;
        prev_sign = s;
      }
    }
  return SdfField(origin, cell, nodes, padding, std::move(values));
}

// ---------------------------------------------------------------------------
// Cache: "KTSDF\0\0\0", u32 version, u32 nodes[3], f64 origin[3], f64 cell, f64 padding,
// then f32 values, row-major with z fastest. All little endian.

namespace {

constexpr char kMagic[8] = {'K', 'T', 'S', 'D', 'F', 0, 0, 0};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_le(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error(ErrorCode::ParseError, "truncated SDF cache");
  return v;
}

}  // namespace

void save_sdf_cache(const SdfField& f, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kMagic, 8);
  write_le(out, kVersion);
  for (int n : f.nodes()) write_le(out, static_cast<std::uint32_t>(n));
  for (int a = 0; a < 3; ++a) write_le(out, f.origin()[a]);
  write_le(out, f.cell_size());
  write_le(out, f.padding());
  out.write(reinterpret_cast<const char*>(f.values().data()),
            static_cast<std::streamsize>(f.values().size() * sizeof(float)));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

SdfField load_sdf_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw Error(ErrorCode::ParseError, "bad SDF cache magic");
  if (read_le<std::uint32_t>(in) != kVersion) throw Error(ErrorCode::ParseError, "unsupported SDF cache version");
  std::array<int, 3> nodes;
  for (auto& n : nodes) n = static_cast<int>(read_le<std::uint32_t>(in));
  Vec3 origin;
  for (int a = 0; a < 3; ++a) origin[a] = read_le<double>(in);
  double cell = read_le<double>(in);
  double padding = read_le<double>(in);
  std::vector<float> values(static_cast<std::size_t>(nodes[0]) * nodes[1] * nodes[2]);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!in) throw Error(ErrorCode::ParseError, "truncated SDF cache");
  return SdfField(origin, cell, nodes, padding, std::move(values));
}

SamplingTiers sample_tiers(const TriangleMesh& mesh, const SamplingConfig& config) {
  if (config.surface_count == 0 || config.near_count == 0 || config.far_count == 0)
    throw Error(ErrorCode::InvalidInput, "tier counts must be positive");
  if (config.surface_sigma < 0 || !(config.near_band > 0))
    throw Error(ErrorCode::InvalidInput, "tier noise parameters must be non-negative");
  SamplingTiers t;
  Rng rng(config.seed ^ 0xabcdef);
  for (const auto& s : sample_surface(mesh, config.surface_count, config.seed)) {
    Vec3 noise = config.surface_sigma > 0
                     ? Vec3(Vec3(rng.normal(), rng.normal(), rng.normal()) * config.surface_sigma)
                     : Vec3::Zero();
    t.surface_points.push_back(s.point + noise);
  }
  for (const auto& s : sample_surface(mesh, config.near_count, config.seed + 1))
    t.near_points.push_back(s.point + rng.uniform(-config.near_band, config.near_band) * s.normal);
  const Aabb box = mesh.bounds();
  const double pad = config.padding_rel * box.diagonal();
  const Vec3 lo = box.min - Vec3::Constant(pad), hi = box.max + Vec3::Constant(pad);
  for (std::size_t i = 0; i < config.far_count; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = rng.uniform(lo[a], hi[a]);
    t.far_points.push_back(p);
  }
  return t;
}

}  // namespace kintree
