#include "kintree/mesh.hpp"

#include "kintree/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <unordered_map>

namespace kintree {

Aabb TriangleMesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

Vec3 TriangleMesh::face_normal(std::size_t f) const {
  const auto& t = faces[f];
  return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
}

double TriangleMesh::surface_area() const {
  double area = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) area += 0.5 * face_normal(f).norm();
  return area;
}

namespace {

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

bool TriangleMesh::is_closed_manifold() const {
  if (faces.empty()) return false;
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(faces.size() * 3);
  for (const auto& t : faces) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (++directed[edge_key(a, b)] > 1) return false;
    }
  }
  for (const auto& [key, count] : directed) {
    int a = static_cast<int>(key >> 32);
    int b = static_cast<int>(key & 0xffffffffu);
    if (!directed.contains(edge_key(b, a))) return false;
  }
  return true;
}

std::size_t TriangleMesh::boundary_edge_count() const {
  std::map<std::pair<int, int>, int> undirected;
  for (const auto& t : faces) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      ++undirected[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::size_t n = 0;
  for (const auto& [e, c] : undirected)
    if (c == 1) ++n;
  return n;
}

TriangleMesh TriangleMesh::translated(const Vec3& t) const {
  TriangleMesh out = *this;
  for (auto& v : out.vertices) v += t;
  return out;
}

// splitmix64 seeding + xorshift-style stepping; small, fast and portable.
Rng::Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {}

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

Vec3 Rng::unit_vector() {
  for (;;) {
    Vec3 v(normal(), normal(), normal());
    double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, std::size_t count,
                                          std::uint64_t seed) {
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += 0.5 * mesh.face_normal(f).norm();
    cumulative[f] = total;
  }
  if (total <= 0.0) throw Error(ErrorCode::DegenerateMesh, "mesh has zero surface area");

  Rng rng(seed);
  std::vector<SurfaceSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double r = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    std::size_t f = std::min<std::size_t>(it - cumulative.begin(), mesh.faces.size() - 1);
    double s = std::sqrt(rng.uniform());
    double t = rng.uniform();
    const auto& tri = mesh.faces[f];
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    Vec3 p = (1.0 - s) * a + s * (1.0 - t) * b + s * t * c;
    Vec3 n = mesh.face_normal(f);
    double nn = n.norm();
    out.push_back({p, nn > 0 ? Vec3(n / nn) : Vec3::UnitZ(), static_cast<int>(f)});
  }
  return out;
}

std::vector<Vec3> sample_surface_points(const TriangleMesh& mesh, std::size_t count,
                                        std::uint64_t seed) {
  auto samples = sample_surface(mesh, count, seed);
  std::vector<Vec3> pts;
  pts.reserve(samples.size());
  for (const auto& s : samples) pts.push_back(s.point);
  return pts;
}

double point_triangle_distance_sq(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                                  Vec3* closest) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  Vec3 q;
  if (d1 <= 0.0 && d2 <= 0.0) {
    q = a;
  } else {
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
      q = b;
    } else {
      const double vc = d1 * d4 - d3 * d2;
      if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        q = a + (d1 / (d1 - d3)) * ab;
      } else {
        const Vec3 cp = p - c;
        const double d5 = ab.dot(cp), d6 = ac.dot(cp);
        if (d6 >= 0.0 && d5 <= d6) {
          q = c;
        } else {
          const double vb = d5 * d2 - d1 * d6;
          if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
            q = a + (d2 / (d2 - d6)) * ac;
          } else {
            const double va = d3 * d6 - d5 * d4;
            if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
              q = b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
            } else {
              const double denom = 1.0 / (va + vb + vc);
              q = a + ab * (vb * denom) + ac * (vc * denom);
            }
          }
        }
      }
    }
  }
  if (closest) *closest = q;
  return (p - q).squaredNorm();
}

double triangle_solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 x = a - p, y = b - p, z = c - p;
  const double lx = x.norm(), ly = y.norm(), lz = z.norm();
  const double det = x.dot(y.cross(z));
  const double div = lx * ly * lz + x.dot(y) * lz + y.dot(z) * lx + z.dot(x) * ly;
  return 2.0 * std::atan2(det, div);
}

double distance_to_mesh_brute_force(const TriangleMesh& mesh, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.faces)
    best = std::min(best, point_triangle_distance_sq(p, mesh.vertices[t[0]], mesh.vertices[t[1]],
                                                     mesh.vertices[t[2]]));
  return std::sqrt(best);
}

double winding_number_brute_force(const TriangleMesh& mesh, const Vec3& p) {
  double sum = 0.0;
  for (const auto& t : mesh.faces)
    sum += triangle_solid_angle(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  return sum / (4.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------
// I/O

TriangleMesh load_mesh(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".obj") return load_obj(path);
  if (ext == ".ply") return load_ply(path);
  throw Error(ErrorCode::ParseError, "unsupported mesh format: " + path.string());
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  TriangleMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z()))
        throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno));
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        int i = 0;
        try {
          i = std::stoi(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno));
        }
        if (i < 0) i = static_cast<int>(mesh.vertices.size()) + i + 1;
        idx.push_back(i - 1);
      }
      if (idx.size() != 3)
        throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) +
                                               ": only triangular faces are supported");
      mesh.faces.push_back({idx[0], idx[1], idx[2]});
    }
  }
  return mesh;
}

namespace {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType parse_ply_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::Int8;
  if (s == "uchar" || s == "uint8") return PlyType::UInt8;
  if (s == "short" || s == "int16") return PlyType::Int16;
  if (s == "ushort" || s == "uint16") return PlyType::UInt16;
  if (s == "int" || s == "int32") return PlyType::Int32;
  if (s == "uint" || s == "uint32") return PlyType::UInt32;
  if (s == "float" || s == "float32") return PlyType::Float32;
  if (s == "double" || s == "float64") return PlyType::Float64;
  throw Error(ErrorCode::ParseError, "unknown PLY type " + s);
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

double read_ply_value(std::istream& in, PlyType t) {
  char buf[8];
  in.read(buf, static_cast<std::streamsize>(ply_size(t)));
  if (!in) throw Error(ErrorCode::ParseError, "truncated PLY body");
  switch (t) {
    case PlyType::Int8: { std::int8_t v; std::memcpy(&v, buf, 1); return v; }
    case PlyType::UInt8: { std::uint8_t v; std::memcpy(&v, buf, 1); return v; }
    case PlyType::Int16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
    case PlyType::UInt16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
    case PlyType::Int32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
    case PlyType::UInt32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
    case PlyType::Float32: { float v; std::memcpy(&v, buf, 4); return v; }
    case PlyType::Float64: { double v; std::memcpy(&v, buf, 8); return v; }
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

}  // namespace

TriangleMesh load_ply(const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "PLY reader assumes little endian");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw Error(ErrorCode::ParseError, "missing PLY magic");
  std::vector<PlyElement> elements;
  bool binary_le = false;
  for (;;) {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "unterminated PLY header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "format") {
      std::string fmt;
      ss >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (tag == "element") {
      PlyElement e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw Error(ErrorCode::ParseError, "property before element");
      PlyProperty p;
      std::string type;
      ss >> type;
      if (type == "list") {
        std::string ct, it;
        ss >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(ct);
        p.type = parse_ply_type(it);
      } else {
        p.type = parse_ply_type(type);
        ss >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (tag == "end_header") {
      break;
    }
  }
  if (!binary_le) throw Error(ErrorCode::ParseError, "only binary_little_endian PLY is supported");

  TriangleMesh mesh;
  for (const auto& e : elements) {
    for (std::size_t i = 0; i < e.count; ++i) {
      Vec3 v = Vec3::Zero();
      for (const auto& p : e.properties) {
        if (p.is_list) {
          auto n = static_cast<std::size_t>(read_ply_value(in, p.count_type));
          std::vector<int> idx(n);
          for (auto& k : idx) k = static_cast<int>(read_ply_value(in, p.type));
          if (e.name == "face" && (p.name == "vertex_indices" || p.name == "vertex_index")) {
            if (n != 3)
              throw Error(ErrorCode::ParseError, "only triangular faces are supported");
            mesh.faces.push_back({idx[0], idx[1], idx[2]});
          }
        } else {
          double val = read_ply_value(in, p.type);
          if (e.name == "vertex") {
            if (p.name == "x") v.x() = val;
            if (p.name == "y") v.y() = val;
            if (p.name == "z") v.z() = val;
          }
        }
      }
      if (e.name == "vertex") mesh.vertices.push_back(v);
    }
  }
  return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

void save_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices) out.write(reinterpret_cast<const char*>(v.data()), 24);
  for (const auto& f : mesh.faces) {
    std::uint8_t n = 3;
    out.write(reinterpret_cast<const char*>(&n), 1);
    for (int k : f) {
      std::int32_t i = k;
      out.write(reinterpret_cast<const char*>(&i), 4);
    }
  }
}

// ---------------------------------------------------------------------------
// Primitives

TriangleMesh make_box(const Vec3& lo, const Vec3& hi, int divisions) {
  if (divisions < 1) throw Error(ErrorCode::InvalidInput, "box divisions must be >= 1");
  const int n = divisions;
  TriangleMesh m;
  std::map<std::array<int, 3>, int> index;
  auto coord = [&](int axis, int i) {
    return i == n ? hi[axis] : lo[axis] + (hi[axis] - lo[axis]) * (static_cast<double>(i) / n);
  };
  auto vertex = [&](std::array<int, 3> g) {
    auto [it, inserted] = index.emplace(g, static_cast<int>(m.vertices.size()));
    if (inserted) m.vertices.emplace_back(coord(0, g[0]), coord(1, g[1]), coord(2, g[2]));
    return it->second;
  };
  // Each face spans tangent axes u = a+1, v = a+2, so u x v points along +a.
  for (int a = 0; a < 3; ++a)
    for (int side = 0; side < 2; ++side) {
      const int u = (a + 1) % 3, v = (a + 2) % 3;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          auto at = [&](int di, int dj) {
            std::array<int, 3> g{};
            g[a] = side ? n : 0;
            g[u] = i + di;
            g[v] = j + dj;
            return vertex(g);
          };
          int q0 = at(0, 0), q1 = at(1, 0), q2 = at(1, 1), q3 = at(0, 1);
          if (side) {
            m.faces.push_back({q0, q1, q2});
            m.faces.push_back({q0, q2, q3});
          } else {
            m.faces.push_back({q0, q2, q1});
            m.faces.push_back({q0, q3, q2});
          }
        }
    }
  return m;
}

namespace {

// Cyclic axis permutation mapping local z onto the requested world axis.
Vec3 orient(const Vec3& local, int axis) {
  switch (axis) {
    case 0: return {local.z(), local.x(), local.y()};
    case 1: return {local.y(), local.z(), local.x()};
    default: return local;
  }
}

}  // namespace

TriangleMesh make_cylinder(const Vec3& base, double radius, double height, int segments, int axis) {
  TriangleMesh m;
  const int n = segments;
  for (int ring = 0; ring < 2; ++ring)
    for (int i = 0; i < n; ++i) {
      double a = 2.0 * std::numbers::pi * i / n;
      m.vertices.push_back(base + orient({radius * std::cos(a), radius * std::sin(a), ring * height}, axis));
    }
  const int bottom = static_cast<int>(m.vertices.size());
  m.vertices.push_back(base);
  const int top = bottom + 1;
  m.vertices.push_back(base + orient({0, 0, height}, axis));
  for (int i = 0; i < n; ++i) {
    int j = (i + 1) % n;
    m.faces.push_back({i, j, n + i});
    m.faces.push_back({j, n + j, n + i});
    m.faces.push_back({bottom, j, i});
    m.faces.push_back({top, n + i, n + j});
  }
  return m;
}

TriangleMesh make_tube(const Vec3& base, double r_in, double r_out, double height, int segments,
                       int axis) {
  TriangleMesh m;
  const int n = segments;
  // rings: 0 outer-bottom, 1 outer-top, 2 inner-bottom, 3 inner-top
  for (int ring = 0; ring < 4; ++ring) {
    double r = ring < 2 ? r_out : r_in;
    double z = (ring % 2) * height;
    for (int i = 0; i < n; ++i) {
      double a = 2.0 * std::numbers::pi * i / n;
      m.vertices.push_back(base + orient({r * std::cos(a), r * std::sin(a), z}, axis));
    }
  }
  auto id = [n](int ring, int i) { return ring * n + (i % n); };
  for (int i = 0; i < n; ++i) {
    int j = i + 1;
    m.faces.push_back({id(0, i), id(0, j), id(1, i)});  // outer wall
    m.faces.push_back({id(0, j), id(1, j), id(1, i)});
    m.faces.push_back({id(2, i), id(3, i), id(2, j)});  // inner wall, facing the axis
    m.faces.push_back({id(2, j), id(3, i), id(3, j)});
    m.faces.push_back({id(1, i), id(1, j), id(3, i)});  // top annulus
    m.faces.push_back({id(1, j), id(3, j), id(3, i)});
    m.faces.push_back({id(0, i), id(2, i), id(0, j)});  // bottom annulus
    m.faces.push_back({id(0, j), id(2, i), id(2, j)});
  }
  return m;
}

TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                             {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                             {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Face> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoints;
    auto mid = [&](int a, int b) {
      auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      verts.push_back((0.5 * (verts[a] + verts[b])).normalized());
      int id = static_cast<int>(verts.size()) - 1;
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }
  TriangleMesh m;
  for (const auto& v : verts) m.vertices.push_back(center + radius * v);
  m.faces = std::move(faces);
  return m;
}

TriangleMesh merge_meshes(std::span<const TriangleMesh> meshes) {
  TriangleMesh out;
  for (const auto& m : meshes) {
    int offset = static_cast<int>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), m.vertices.begin(), m.vertices.end());
    for (const auto& f : m.faces) out.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
  }
  return out;
}

}  // namespace kintree
