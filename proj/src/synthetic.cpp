#include "kintree/synthetic.hpp"

#include "kintree/error.hpp"

#include <fstream>

namespace kintree {

std::string_view to_string(Template t) {
  switch (t) {
    case Template::Chain: return "chain";
    case Template::Star: return "star";
    case Template::MultiBranch: return "multi-branch";
    case Template::SymmetricLegs: return "symmetric-legs";
    case Template::Door: return "door";
    case Template::Drawer: return "drawer";
    case Template::Loop: return "loop";
  }
  return "chain";
}

Template template_from_string(std::string_view s) {
  for (Template t : {Template::Chain, Template::Star, Template::MultiBranch, Template::SymmetricLegs, Template::Door,
                     Template::Drawer, Template::Loop})
    if (to_string(t) == s) return t;
  throw Error(ErrorCode::InvalidInput, "unknown template '" + std::string(s) + "'");
}

namespace {

// Hinge dimensions in assembly units (assemblies are laid out with diagonal ~1).
constexpr double kRin = 0.04;         // knuckle bore
constexpr double kRout = 0.07;        // knuckle outer radius
constexpr double kHalf = 0.05;        // knuckle half height
constexpr double kClear = 0.0075;     // pin clearance
constexpr double kCollarGap = 0.001;  // collar above the knuckle
constexpr double kCollar = 0.06;      // collar thickness
constexpr double kArm = 0.025;        // arm thickness
constexpr double kArmW = 0.02;
constexpr double kBracketW = 0.025;
constexpr double kParentReach = 0.1;  // hinge center to parent body
constexpr double kChildReach = 0.11;    // hinge center to child body
constexpr double kOverlap = 0.015;
constexpr int kSegments = 48;

struct Builder {
  std::vector<std::vector<TriangleMesh>> pieces;
  explicit Builder(std::size_t n) : pieces(n) {}
  void add(int part, TriangleMesh m) { pieces[part].push_back(std::move(m)); }
  void box(int part, const Vec3& a, const Vec3& b) { add(part, make_box(a.cwiseMin(b), a.cwiseMax(b))); }
};

TriangleMesh transformed(TriangleMesh m, const Vec3& origin, const Mat3& frame) {
  for (auto& v : m.vertices) v = origin + frame * v;
  return m;
}

/// Three-knuckle hinge around center `j`: a parent knuckle with its bracket,
/// and a child pin with collars above and below, arms and a drop. The child
/// body begins kChildReach along `d`, the parent body kParentReach along -d.
void add_hinge(Builder& b, int parent, int child, const Vec3& j, const Vec3& axis, const Vec3& d) {
  Mat3 f;
  f.col(0) = d;
  f.col(1) = axis.cross(d);
  f.col(2) = axis;
  auto put = [&](int part, TriangleMesh m) { b.add(part, transformed(std::move(m), j, f)); };
  const double top = kHalf + kCollarGap + kCollar;
  const double arm_x0 = 0.5 * (kRin + kRout);
  put(parent, make_tube(Vec3(0, 0, -kHalf), kRin, kRout, 2 * kHalf, kSegments, 2));
  put(parent, make_box(Vec3(-kParentReach - kOverlap, -kBracketW, -kHalf + 0.035),
                       Vec3(-(kRout - 0.005), kBracketW, kHalf - 0.035)));
  put(child, make_cylinder(Vec3(0, 0, -top), kRin - kClear, 2 * top, kSegments, 2));
  put(child, make_cylinder(Vec3(0, 0, kHalf + kCollarGap), kRout, kCollar, kSegments, 2));
  put(child, make_cylinder(Vec3(0, 0, -top), kRout, kCollar, kSegments, 2));
  put(child, make_box(Vec3(arm_x0, -kArmW, top - kArm), Vec3(kChildReach + kOverlap, kArmW, top)));
  put(child, make_box(Vec3(arm_x0, -kArmW, -top), Vec3(kChildReach + kOverlap, kArmW, -top + kArm)));
  put(child, make_box(Vec3(kChildReach, -kArmW, -top), Vec3(kChildReach + 0.03, kArmW, top)));
}

GroundTruthJoint revolute(int parent, int child, const Vec3& pivot, const Vec3& axis) {
  GroundTruthJoint g;
  g.parent = parent;
  g.child = child;
  g.type = "revolute";
  g.axis = axis;
  g.pivot = pivot;
  return g;
}

SyntheticAssembly finish(Template kind, Builder& b, std::vector<std::string> names, GroundTruth truth) {
  SyntheticAssembly a;
  a.kind = kind;
  a.names = std::move(names);
  for (auto& p : b.pieces) a.meshes.push_back(merge_meshes(p));
  Aabb box;
  for (const auto& m : a.meshes) box.extend(m.bounds());
  a.diagonal = box.diagonal();
  std::vector<Vec3> centroids;
  for (const auto& m : a.meshes) centroids.push_back(part_stats(m).centroid);
  for (auto& e : truth.edges) e.origin = centroids[e.child] - centroids[e.parent];
  a.truth = std::move(truth);
  // Joint clearances are sized against a unit diagonal.
  if (a.diagonal < 0.75 || a.diagonal > 1.3)
    throw Error(ErrorCode::InvalidInput, "synthetic layout diagonal out of range: " + std::to_string(a.diagonal));
  return a;
}

constexpr double kHalfW = 0.04;  // half cross-section of link bodies

/// Axis-aligned link body from `start` along unit axis-aligned `d`.
void link_body(Builder& b, int part, const Vec3& start, const Vec3& d, double length) {
  Vec3 half = Vec3::Constant(kHalfW) - d.cwiseAbs() * kHalfW;
  b.box(part, start - half, start + d * length + half);
}

SyntheticAssembly chain(Rng& rng, int n) {
  if (n == 0) n = 3;
  if (n < 2 || n > 4) throw Error(ErrorCode::InvalidInput, "chain template supports 2 to 4 links");
  const double base_len[] = {0, 0, 0.3, 0.16, 0.1};
  const int root = n >= 3 ? 1 : 0;
  Builder b(n);
  GroundTruth gt{root, {}};
  std::vector<std::string> names;
  const Vec3 x = Vec3::UnitX(), z = Vec3::UnitZ();
  double pos = 0;
  for (int i = 0; i < n; ++i) {
    names.push_back("link" + std::to_string(i));
    double len = base_len[n] * rng.uniform(0.92, 1.08);
    link_body(b, i, Vec3(pos, 0, 0), x, len);
    pos += len;
    if (i + 1 == n) break;
    if (i >= root) {
      Vec3 j(pos + kParentReach, 0, 0);
      add_hinge(b, i, i + 1, j, z, x);
      gt.edges.push_back(revolute(i, i + 1, j, z));
      pos = j.x() + kChildReach;
    } else {
      Vec3 j(pos + kChildReach, 0, 0);
      add_hinge(b, i + 1, i, j, z, -x);
      gt.edges.push_back(revolute(i + 1, i, j, z));
      pos = j.x() + kParentReach;
    }
  }
  return finish(Template::Chain, b, names, gt);
}

SyntheticAssembly star(Rng& rng) {
  const Vec3 dirs[] = {Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitX(), -Vec3::UnitY()};
  Builder b(5);
  std::vector<std::string> names{"hub"};
  GroundTruth gt{0, {}};
  const double hub = 0.07;
  b.box(0, Vec3(-hub, -hub, -kHalfW), Vec3(hub, hub, kHalfW));
  for (int i = 0; i < 4; ++i) {
    const Vec3& d = dirs[i];
    Vec3 j = d * (hub + kParentReach);
    add_hinge(b, 0, i + 1, j, Vec3::UnitZ(), d);
    link_body(b, i + 1, j + d * kChildReach, d, 0.12 * rng.uniform(0.9, 1.1));
    gt.edges.push_back(revolute(0, i + 1, j, Vec3::UnitZ()));
    names.push_back("spoke" + std::to_string(i));
  }
  return finish(Template::Star, b, names, gt);
}

SyntheticAssembly multi_branch(Rng& rng) {
  Builder b(5);
  std::vector<std::string> names{"hub", "arm_a", "arm_a_tip", "arm_b", "arm_c"};
  GroundTruth gt{0, {}};
  const double hub = 0.06;
  const Vec3 z = Vec3::UnitZ();
  b.box(0, Vec3(-hub, -hub, -kHalfW), Vec3(hub, hub, kHalfW));
  auto branch = [&](int parent, int child, const Vec3& from, const Vec3& d, double len) {
    Vec3 j = from + d * kParentReach;
    add_hinge(b, parent, child, j, z, d);
    Vec3 start = j + d * kChildReach;
    link_body(b, child, start, d, len);
    gt.edges.push_back(revolute(parent, child, j, z));
    return Vec3(start + d * len);
  };
  Vec3 end_a = branch(0, 1, Vec3(hub, 0, 0), Vec3::UnitX(), 0.1 * rng.uniform(0.9, 1.1));
  branch(1, 2, end_a, Vec3::UnitX(), 0.08 * rng.uniform(0.9, 1.1));
  branch(0, 3, Vec3(-hub, 0, 0), -Vec3::UnitX(), 0.1 * rng.uniform(0.9, 1.1));
  branch(0, 4, Vec3(0, hub, 0), Vec3::UnitY(), 0.1 * rng.uniform(0.9, 1.1));
  return finish(Template::MultiBranch, b, names, gt);
}

SyntheticAssembly symmetric_legs(Rng& rng, int legs) {
  if (legs == 0) legs = 4;
  if (legs != 2 && legs != 4) throw Error(ErrorCode::InvalidInput, "symmetric-legs supports 2 or 4 legs");
  const double sx = 0.35 * rng.uniform(0.95, 1.05);
  const double leg_len = 0.22 * rng.uniform(0.92, 1.08);
  const double bottom = 0.45;
  Builder b(legs + 1);
  std::vector<std::string> names{"torso"};
  GroundTruth gt{0, {}};
  b.box(0, Vec3(-sx, -0.2, bottom), Vec3(sx, 0.2, 0.6));
  // One leg built at the origin, then translated into place.
  Builder leg(2);
  const Vec3 axis = Vec3::UnitY(), d = -Vec3::UnitZ();
  const Vec3 j0(0, 0, bottom - kParentReach);
  add_hinge(leg, 0, 1, j0, axis, d);
  link_body(leg, 1, j0 + d * kChildReach, d, leg_len);
  TriangleMesh leg_mesh = merge_meshes(leg.pieces[1]);
  std::vector<Vec3> offsets;
  const double lx = sx - 0.1;
  if (legs == 4)
    offsets = {Vec3(-lx, -0.14, 0), Vec3(lx, -0.14, 0), Vec3(-lx, 0.14, 0), Vec3(lx, 0.14, 0)};
  else
    offsets = {Vec3(-lx, 0, 0), Vec3(lx, 0, 0)};
  for (int i = 0; i < legs; ++i) {
    for (const auto& m : leg.pieces[0]) b.add(0, m.translated(offsets[i]));
    b.add(i + 1, leg_mesh.translated(offsets[i]));
    gt.edges.push_back(revolute(0, i + 1, j0 + offsets[i], axis));
    names.push_back("leg" + std::to_string(i));
  }
  return finish(Template::SymmetricLegs, b, names, gt);
}

SyntheticAssembly door(Rng& rng) {
  const double height = 0.7 * rng.uniform(0.95, 1.05);
  const double width = 0.5 * rng.uniform(0.95, 1.05);
  Builder b(2);
  const Vec3 j(0, 0, 0.5 * height);
  const Vec3 z = Vec3::UnitZ(), x = Vec3::UnitX();
  // Frame post behind the hinge, door slab beyond it.
  b.box(0, Vec3(-kParentReach - 0.06, -0.04, 0), Vec3(-kParentReach, 0.04, height));
  add_hinge(b, 0, 1, j, z, x);
  b.box(1, Vec3(kChildReach, -0.02, 0), Vec3(kChildReach + width, 0.02, height));
  GroundTruth gt{0, {revolute(0, 1, j, z)}};
  return finish(Template::Door, b, {"frame", "door"}, gt);
}

SyntheticAssembly drawer(Rng& rng) {
  const double depth = 0.7 * rng.uniform(0.97, 1.03);
  const double t = 0.02;
  const double w = 0.2, h = 0.3;
  Builder b(2);
  // Cabinet shell open towards +x.
  b.box(0, Vec3(0, -w, 0), Vec3(depth, w, t));          // bottom
  b.box(0, Vec3(0, -w, h - t), Vec3(depth, w, h));      // top
  b.box(0, Vec3(0, -w, t), Vec3(depth, -w + t, h - t));  // side
  b.box(0, Vec3(0, w - t, t), Vec3(depth, w, h - t));   // side
  b.box(0, Vec3(0, -w + t, t), Vec3(t, w - t, h - t));  // back
  const double bottom_gap = 0.001, back_gap = 0.08;
  b.box(1, Vec3(t + back_gap, -w + t + kClear, t + bottom_gap), Vec3(depth + 0.1, w - t - kClear, h - t - kClear));
  GroundTruthJoint g;
  g.parent = 0;
  g.child = 1;
  g.type = "prismatic";
  g.axis = Vec3::UnitX();
  return finish(Template::Drawer, b, {"cabinet", "drawer"}, GroundTruth{0, {g}});
}

SyntheticAssembly loop(Rng& rng) {
  Builder b(4);
  const Vec3 z = Vec3::UnitZ(), x = Vec3::UnitX();
  const double base_len = 0.3 * rng.uniform(0.95, 1.05);
  link_body(b, 0, Vec3(0, 0, 0), x, base_len);
  // Short arm on the -x end.
  const Vec3 ja(-kParentReach, 0, 0);
  add_hinge(b, 0, 1, ja, z, -x);
  const double a_start = ja.x() - kChildReach;
  const double a_len = 0.15 * rng.uniform(0.97, 1.03);
  link_body(b, 1, Vec3(a_start, 0, 0), -x, a_len);
  // L-shaped elbow on the +x end, turning back over the base.
  const Vec3 jb(base_len + kParentReach, 0, 0);
  add_hinge(b, 0, 2, jb, z, x);
  const double x0 = jb.x() + kChildReach, x_end = x0 + 0.1;
  const double top_y = 0.36 * rng.uniform(0.97, 1.03);
  b.box(2, Vec3(x0, -kHalfW, -kHalfW), Vec3(x_end, kHalfW, kHalfW));
  b.box(2, Vec3(x_end - 2 * kHalfW, -kHalfW, -kHalfW), Vec3(x_end, top_y + kHalfW, kHalfW));
  const double x_b = x_end - 0.2;
  b.box(2, Vec3(x_b, top_y - kHalfW, -kHalfW), Vec3(x_end, top_y + kHalfW, kHalfW));
  // Tip reaching back over the base to above the short arm.
  const Vec3 jc(x_b - kParentReach, top_y, 0);
  add_hinge(b, 2, 3, jc, z, -x);
  const double c_start = jc.x() - kChildReach;
  const double tab_x = a_start - 0.5 * a_len;
  link_body(b, 3, Vec3(c_start, top_y, 0), -x, c_start - tab_x + 0.03);
  GroundTruth gt{0, {revolute(0, 1, ja, z), revolute(0, 2, jb, z), revolute(2, 3, jc, z)}};
  // A tab hanging from the tip stops just short of the short arm.
  Aabb box;
  for (const auto& p : b.pieces)
    for (const auto& m : p) box.extend(m.bounds());
  const double gap = 0.008 * box.diagonal();
  b.box(3, Vec3(tab_x - 0.03, kHalfW + gap, -0.03), Vec3(tab_x + 0.03, top_y - kHalfW + 0.01, 0.03));
  return finish(Template::Loop, b, {"base", "arm", "elbow", "tip"}, gt);
}

}  // namespace

SyntheticAssembly generate_synthetic(Template t, std::uint64_t seed, int parts) {
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(t) + 1);
  switch (t) {
    case Template::Chain: return chain(rng, parts);
    case Template::Star: return star(rng);
    case Template::MultiBranch: return multi_branch(rng);
    case Template::SymmetricLegs: return symmetric_legs(rng, parts);
    case Template::Door: return door(rng);
    case Template::Drawer: return drawer(rng);
    case Template::Loop: return loop(rng);
  }
  throw Error(ErrorCode::InvalidInput, "unknown template");
}

std::filesystem::path write_synthetic(const SyntheticAssembly& a, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "meshes", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (dir / "meshes").string());
  AssemblyManifest m;
  m.base_dir = dir;
  for (std::size_t i = 0; i < a.meshes.size(); ++i) {
    std::filesystem::path rel = std::filesystem::path("meshes") / (a.names[i] + ".obj");
    save_obj(a.meshes[i], dir / rel);
    m.parts.push_back({rel, a.names[i]});
  }
  m.ground_truth = a.truth;
  auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << manifest_to_json(m).dump(2) << "\n";
  return path;
}

std::vector<SuiteEntry> default_fixture_suite() {
  return {{Template::Door, 1, 0},  {Template::Drawer, 1, 0},        {Template::Chain, 1, 3},
          {Template::Chain, 2, 4}, {Template::Star, 1, 0},          {Template::MultiBranch, 1, 0},
          {Template::SymmetricLegs, 1, 4}, {Template::Loop, 1, 0}, {Template::Loop, 2, 0},
          {Template::Loop, 3, 0}};
}

}  // namespace kintree
