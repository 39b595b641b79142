#include "kintree/error.hpp"
#include "kintree/sdf.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace kintree;

namespace {

// Unit-diameter sphere: its center lies 0.5 inside and (2,0,0) lies 1.5 outside
// the surface, while (1.5,0,0) lies at distance 1.
const TriangleMesh& sphere_mesh() {
  static const TriangleMesh m = make_icosphere(Vec3::Zero(), 0.5, 3);
  return m;
}
const SdfField& sphere_field() {
  static const SdfField f = build_sdf(sphere_mesh());
  return f;
}
const SdfField& cube_field() {
  static const SdfField f = build_sdf(make_box(Vec3(0, 0, 0), Vec3(1, 1, 1)));
  return f;
}

double analytic_sphere(const Vec3& p) { return p.norm() - 0.5; }

}  // namespace

TEST_CASE("sphere field at the center") {
  double v = sphere_field().value(Vec3::Zero());
  CHECK(v >= -0.52);
  CHECK(v <= -0.48);
}

TEST_CASE("sphere field one unit outside") {
  double v = sphere_field().value(Vec3(1.5, 0, 0));
  CHECK(v >= 0.95);
  CHECK(v <= 1.05);
  // Radial exterior values follow the analytic distance within 5%.
  for (double r : {0.6, 0.8, 1.0, 2.0, 3.0}) {
    double q = sphere_field().value(Vec3(0, r, 0));
    CHECK(std::abs(q - analytic_sphere(Vec3(0, r, 0))) <= 0.05 * (r - 0.5));
  }
}

TEST_CASE("sphere field at mesh vertices is near zero") {
  const auto& f = sphere_field();
  for (std::size_t i = 0; i < sphere_mesh().vertices.size(); i += 7)
    CHECK(std::abs(f.value(sphere_mesh().vertices[i])) <= 1.5 * f.cell_size());
}

TEST_CASE("gradient outside the sphere points radially") {
  Vec3 g = sphere_field().gradient(Vec3(2, 0, 0));
  double angle = std::acos(std::clamp(g.normalized().dot(Vec3::UnitX()), -1.0, 1.0));
  CHECK(angle <= 5.0 * M_PI / 180.0);
}

TEST_CASE("grid node and midpoint interpolation") {
  const auto& f = sphere_field();
  for (int i : {0, 5, 17, 30})
    for (int j : {0, 9, 20})
      for (int k : {3, 11}) CHECK(f.value(f.node_position(i, j, k)) == doctest::Approx(f.node_value(i, j, k)).epsilon(1e-12));
  Vec3 mid = 0.5 * (f.node_position(10, 12, 14) + f.node_position(11, 12, 14));
  CHECK(f.value(mid) ==
        doctest::Approx(0.5 * (double(f.node_value(10, 12, 14)) + f.node_value(11, 12, 14))).epsilon(1e-12));
}

TEST_CASE("surface samples have small values") {
  auto pts = sample_surface_points(sphere_mesh(), 1000, 1);
  auto v = sphere_field().query(pts);
  double mean = 0.0;
  for (double x : v) mean += std::abs(x);
  mean /= double(v.size());
  CHECK(mean < sphere_field().cell_size());
}

TEST_CASE("constant field has zero gradient") {
  SdfField f(Vec3::Zero(), 0.1, {4, 4, 4}, 0.0, std::vector<float>(64, 0.25f));
  CHECK(f.gradient(Vec3(0.13, 0.2, 0.27)).norm() == 0.0);
  CHECK(f.value(Vec3(0.13, 0.2, 0.27)) == doctest::Approx(0.25));
}

TEST_CASE("analytic gradient matches central differences") {
  const auto& f = sphere_field();
  Rng rng(21);
  const double h = 1e-5 * f.cell_size();
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    Vec3 p = f.origin() + Vec3(rng.uniform(), rng.uniform(), rng.uniform()).cwiseProduct(f.upper() - f.origin());
    // Stay away from cell faces where the interpolant kinks.
    Vec3 local = (p - f.origin()) / f.cell_size();
    Vec3 frac = local - local.array().floor().matrix();
    if ((frac.array() < 0.01).any() || (frac.array() > 0.99).any()) continue;
    Vec3 g = f.gradient(p);
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = h;
      double fd = (f.value(p + e) - f.value(p - e)) / (2 * h);
      CHECK(std::abs(fd - g[a]) <= 1e-6 * std::max(1.0, std::abs(g[a])));
    }
    ++checked;
  }
  CHECK(checked > 200);
}

TEST_CASE("gradient has near unit norm away from the surface") {
  const auto& f = sphere_field();
  Rng rng(2);
  for (int t = 0; t < 500; ++t) {
    Vec3 p = f.origin() + Vec3(rng.uniform(), rng.uniform(), rng.uniform()).cwiseProduct(f.upper() - f.origin());
    if (std::abs(analytic_sphere(p)) < 2 * f.cell_size() + 0.01) continue;
    if (p.norm() < 2 * f.cell_size()) continue;  // medial point of the sphere
    CHECK(f.gradient(p).norm() == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("sign agrees with the analytic inside test") {
  const auto& f = cube_field();
  Rng rng(8);
  int mismatches = 0;
  for (int t = 0; t < 10000; ++t) {
    Vec3 p = f.origin() + Vec3(rng.uniform(), rng.uniform(), rng.uniform()).cwiseProduct(f.upper() - f.origin());
    bool inside = (p.array() > 0).all() && (p.array() < 1).all();
    Vec3 d_in = p.cwiseMin(Vec3::Ones() - p);
    Vec3 d_out = (-p).cwiseMax(p - Vec3::Ones()).cwiseMax(Vec3::Zero());
    double dist = inside ? d_in.minCoeff() : d_out.norm();
    if (dist < 1.5 * f.cell_size()) continue;
    if ((f.value(p) < 0) != inside) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("query is 1-Lipschitz up to grid error") {
  const auto& f = sphere_field();
  Rng rng(13);
  Vec3 ext = f.upper() - f.origin();
  for (int t = 0; t < 2000; ++t) {
    Vec3 x = f.origin() + Vec3(rng.uniform(), rng.uniform(), rng.uniform()).cwiseProduct(ext);
    Vec3 y = f.origin() + Vec3(rng.uniform(), rng.uniform(), rng.uniform()).cwiseProduct(ext);
    CHECK(std::abs(f.value(x) - f.value(y)) <= (x - y).norm() + 2 * f.cell_size());
  }
}

TEST_CASE("directional derivative matches finite differences") {
  const auto& f = sphere_field();
  Rng rng(17);
  int checked = 0;
  for (int t = 0; t < 400; ++t) {
    Vec3 p = f.origin() + Vec3(rng.uniform(), rng.uniform(), rng.uniform()).cwiseProduct(f.upper() - f.origin());
    if (std::abs(analytic_sphere(p)) < 2 * f.cell_size()) continue;
    Vec3 local = (p - f.origin()) / f.cell_size();
    Vec3 frac = local - local.array().floor().matrix();
    if ((frac.array() < 0.01).any() || (frac.array() > 0.99).any()) continue;
    Vec3 d = rng.unit_vector();
    double h = 1e-6 * f.cell_size();
    double fd = (f.value(p + h * d) - f.value(p - h * d)) / (2 * h);
    double an = f.gradient(p).dot(d);
    CHECK(std::abs(fd - an) <= 1e-3 * std::max(std::abs(an), 1e-2));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("outside points are clamped plus box distance") {
  const auto& f = sphere_field();
  Vec3 inside_edge(f.upper().x(), 0, 0);
  Vec3 out = inside_edge + Vec3(0.5, 0, 0);
  CHECK(f.value(out) == doctest::Approx(f.value(inside_edge) + 0.5).epsilon(1e-9));
}

TEST_CASE("degenerate mesh has no area") {
  TriangleMesh m{{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2)}, {{0, 1, 2}}};
  try {
    build_sdf(m);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateMesh);
  }
}

TEST_CASE("resolution and padding") {
  auto box = make_box(Vec3(0, 0, 0), Vec3(2, 1, 0.1));
  SdfOptions o;
  auto f = build_sdf(box, o);
  CHECK(f.nodes()[0] == o.resolution + 1);
  CHECK(f.nodes()[2] >= o.min_cells_per_axis + 1);
  CHECK((f.origin().array() <= -0.1 * box.bounds().diagonal() + 1e-12).all());
}

TEST_CASE("open mesh sign via fallback") {
  auto m = make_box(Vec3(0, 0, 0), Vec3(1, 1, 1));
  std::vector<Face> kept;
  for (std::size_t i = 0; i < m.faces.size(); ++i)
    if (m.face_normal(i).normalized().z() < 0.99) kept.push_back(m.faces[i]);
  m.faces = kept;
  auto f = build_sdf(m);
  CHECK(f.value(Vec3(0.5, 0.5, 0.3)) < 0);
  CHECK(f.value(Vec3(0.5, 0.5, -0.3)) > 0);
  CHECK(f.value(Vec3(1.3, 0.5, 0.5)) > 0);
}

TEST_CASE("cache round trip") {
  auto path = std::filesystem::temp_directory_path() / "kintree_cube.sdf";
  save_sdf_cache(cube_field(), path);
  auto back = load_sdf_cache(path);
  CHECK(back == cube_field());
  CHECK_THROWS_AS(load_sdf_cache(std::filesystem::temp_directory_path() / "kintree_missing.sdf"), Error);
}

TEST_CASE("sampling tiers") {
  auto cube = make_box(Vec3(0, 0, 0), Vec3(1, 1, 1));
  SamplingConfig c;
  auto t = sample_tiers(cube, c);
  CHECK(t.surface_points.size() == 1000);
  CHECK(t.near_points.size() == 1000);
  CHECK(t.far_points.size() == 1000);
  for (const auto& p : t.surface_points) CHECK(distance_to_mesh_brute_force(cube, p) < 1e-12);
  const auto& f = cube_field();
  for (const auto& p : t.near_points) CHECK(std::abs(f.value(p)) <= 0.05 + 1.5 * f.cell_size());
  auto t2 = sample_tiers(cube, c);
  CHECK(t2.far_points == t.far_points);
  c.surface_sigma = 0.01;
  auto noisy = sample_tiers(cube, c);
  double off = 0.0;
  for (const auto& p : noisy.surface_points) off = std::max(off, distance_to_mesh_brute_force(cube, p));
  CHECK(off > 0.0);
}

TEST_CASE("parallel builds are thread-safe and identical") {
  auto a = build_sdf(make_box(Vec3(0, 0, 0), Vec3(1, 1, 1)));
  CHECK(a == cube_field());
}
