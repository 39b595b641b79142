#include "kintree/error.hpp"
#include "kintree/joints.hpp"
#include "kintree/synthetic.hpp"
#include "kintree/urdf.hpp"

#include <doctest.h>

#include <fstream>
#include <numbers>
#include <sstream>

using namespace kintree;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kintree_test_urdf_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LoadedAssembly boxes(int n) {
  std::vector<TriangleMesh> meshes;
  for (int i = 0; i < n; ++i) meshes.push_back(make_box(Vec3(i, 0, 0), Vec3(i + 1.0, 0.5, 0.4)));
  return make_assembly(std::move(meshes));
}

/// Chain 0 -> 1 -> 2 with a tilted revolute then a prismatic joint.
KinematicTree mixed_chain(const LoadedAssembly& a) {
  KinematicTree t(3, 0);
  TreeEdge e1;
  e1.parent = 0;
  e1.child = 1;
  e1.joint.type = JointType::Revolute;
  e1.joint.axis = Vec3(0.3, -0.2, 0.9).normalized();
  e1.joint.pivot = Vec3(1.0, 0.25, 0.2);
  e1.joint.origin = a.parts[1].centroid - a.parts[0].centroid;
  TreeEdge e2;
  e2.parent = 1;
  e2.child = 2;
  e2.joint.type = JointType::Prismatic;
  e2.joint.axis = Vec3(1, 1, 0).normalized();
  e2.joint.origin = a.parts[2].centroid - a.parts[1].centroid;
  t.add_edge(e1);
  t.add_edge(e2);
  return t;
}

UrdfOptions options_for(const LoadedAssembly& a) {
  UrdfOptions o;
  o.diagonal = a.diagonal();
  return o;
}

}  // namespace

TEST_CASE("single part gives one link and no joints") {
  auto a = boxes(1);
  KinematicTree t(1, 0);
  auto doc = build_urdf(t, a.parts, options_for(a));
  CHECK(doc.links.size() == 1);
  CHECK(doc.joints.empty());
  auto back = UrdfDocument::parse(doc.to_xml());
  CHECK(back.links.size() == 1);
  CHECK(back.to_tree().edges().empty());
}

TEST_CASE("door joint axis survives export to 1e-9") {
  auto synth = generate_synthetic(Template::Door, 1);
  auto a = make_assembly(synth.meshes, synth.names);
  const double d = a.diagonal();
  auto cfg = DwCavlConfig::for_diagonal(d, 0.01 * d);
  SdfField sdf = build_sdf(a.parts[0].mesh);
  auto est = estimate_joint(a.parts[0], sdf, a.parts[1], cfg, AbstainPrior{});
  REQUIRE(est.spec.type == JointType::Revolute);
  KinematicTree t(2, 0);
  TreeEdge e;
  e.parent = 0;
  e.child = 1;
  e.joint = est.spec;
  t.add_edge(e);
  auto dir = scratch("door");
  auto path = write_urdf(t, a.parts, dir, options_for(a));
  auto doc = read_urdf_document(path);
  REQUIRE(doc.links.size() == 2);
  REQUIRE(doc.joints.size() == 1);
  CHECK(doc.joints[0].type == JointType::Revolute);
  CHECK((*doc.joints[0].axis - *est.spec.axis).norm() < 1e-9);
  CHECK(std::filesystem::exists(dir / doc.links[0].mesh));
}

TEST_CASE("round trip keeps tree, types, axes and pivots") {
  auto a = boxes(3);
  auto t = mixed_chain(a);
  auto doc = build_urdf(t, a.parts, options_for(a));
  auto back = UrdfDocument::parse(doc.to_xml()).to_tree();
  CHECK(back.root() == 0);
  REQUIRE(back.edges().size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& x = t.edges()[i];
    const auto* y = back.edge_to(x.child);
    REQUIRE(y != nullptr);
    CHECK(y->parent == x.parent);
    CHECK(y->joint.type == x.joint.type);
    CHECK((*y->joint.axis - *x.joint.axis).norm() < 1e-9);
    CHECK(std::abs(y->joint.axis->norm() - 1.0) < 1e-9);
    CHECK((y->joint.origin - x.joint.origin).norm() < 1e-9);
    CHECK(y->joint.pivot.has_value() == x.joint.pivot.has_value());
    if (x.joint.pivot) CHECK((*y->joint.pivot - *x.joint.pivot).norm() < 1e-9);
  }
}

TEST_CASE("write, read, write is byte identical") {
  auto a = boxes(3);
  auto t = mixed_chain(a);
  auto dir = scratch("bytes");
  auto first = write_urdf(t, a.parts, dir / "a", options_for(a));
  auto tree = read_urdf(first);
  auto second = write_urdf(tree, a.parts, dir / "b", options_for(a));
  CHECK(slurp(first) == slurp(second));
  auto doc = UrdfDocument::parse(slurp(first));
  CHECK(doc.to_xml() == slurp(first));
}

TEST_CASE("ground truth of every template survives write, read, write byte for byte") {
  for (auto kind : {Template::Chain, Template::Star, Template::MultiBranch, Template::SymmetricLegs, Template::Door,
                    Template::Drawer, Template::Loop}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      auto syn = generate_synthetic(kind, seed);
      auto a = make_assembly(syn.meshes, syn.names);
      KinematicTree t(a.parts.size(), syn.truth.root);
      for (const auto& g : syn.truth.edges) {
        TreeEdge e;
        e.parent = g.parent;
        e.child = g.child;
        e.joint.type = joint_type_from_string(g.type);
        e.joint.axis = g.axis;
        e.joint.pivot = g.pivot;
        e.joint.origin = g.origin;
        t.add_edge(e);
      }
      auto dir = scratch("gt_" + std::string(to_string(kind)) + std::to_string(seed));
      auto first = write_urdf(t, a.parts, dir / "a", options_for(a));
      auto second = write_urdf(read_urdf(first), a.parts, dir / "b", options_for(a));
      CHECK_MESSAGE(slurp(first) == slurp(second), to_string(kind), " seed ", seed);
    }
  }
}

TEST_CASE("document layout") {
  auto a = boxes(3);
  auto t = mixed_chain(a);
  auto doc = build_urdf(t, a.parts, options_for(a));
  // The revolute child's frame is its pivot; the prismatic child's is its centroid.
  CHECK((doc.links[1].visual_xyz + Vec3(1.0, 0.25, 0.2)).norm() < 1e-12);
  CHECK((doc.links[2].visual_xyz + a.parts[2].centroid).norm() < 1e-12);
  CHECK((doc.joints[0].xyz - (Vec3(1.0, 0.25, 0.2) - a.parts[0].centroid)).norm() < 1e-12);
  CHECK(doc.joints[0].upper == doctest::Approx(std::numbers::pi / 2));
  CHECK(doc.joints[1].upper == doctest::Approx(0.1 * a.diagonal()));
  CHECK(doc.joints[1].lower == doctest::Approx(-0.1 * a.diagonal()));
  for (const auto& l : doc.links) CHECK(l.mass == doctest::Approx(0.2));
  const std::string xml = doc.to_xml();
  CHECK(xml.find("rpy=\"0 0 0\"") != std::string::npos);
  CHECK(xml.find("type=\"prismatic\"") != std::string::npos);
}

TEST_CASE("link names are sanitized and unique") {
  auto a = make_assembly({make_box(Vec3(0, 0, 0), Vec3(1, 1, 1)), make_box(Vec3(1, 0, 0), Vec3(2, 1, 1)),
                          make_box(Vec3(2, 0, 0), Vec3(3, 1, 1))},
                         {"left door", "left door", "a/b"});
  auto names = urdf_link_names(a.parts);
  REQUIRE(names.size() == 3);
  CHECK(names[0] != names[1]);
  for (const auto& n : names) CHECK(n.find_first_of(" /") == std::string::npos);
}

TEST_CASE("hand-written three link chain") {
  const std::string xml = R"(<?xml version="1.0"?>
<robot name="hand">
  <link name="base"><visual><origin xyz="0 0 0"/></visual></link>
  <link name="arm"><visual><origin xyz="-1 0 0"/></visual></link>
  <link name="slider"><visual><origin xyz="-2 0 0"/></visual></link>
  <joint name="j1" type="revolute">
    <origin xyz="1 0 0"/><parent link="base"/><child link="arm"/><axis xyz="0 0 2"/>
  </joint>
  <joint name="j2" type="prismatic">
    <origin xyz="1 0 0"/><parent link="arm"/><child link="slider"/><axis xyz="1 0 0"/>
  </joint>
</robot>)";
  auto t = UrdfDocument::parse(xml).to_tree();
  REQUIRE(t.edges().size() == 2);
  CHECK(t.edges()[0].parent == 0);
  CHECK(t.edges()[0].child == 1);
  CHECK(t.edges()[0].joint.type == JointType::Revolute);
  CHECK((*t.edges()[0].joint.axis - Vec3(0, 0, 1)).norm() < 1e-12);
  CHECK((*t.edges()[0].joint.pivot - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK(t.edges()[1].parent == 1);
  CHECK(t.edges()[1].child == 2);
  CHECK(t.edges()[1].joint.type == JointType::Prismatic);
  CHECK_FALSE(t.edges()[1].joint.pivot.has_value());
}

TEST_CASE("continuous joints read as revolute") {
  const std::string xml = R"(<robot name="r"><link name="a"/><link name="b"/>
<joint name="j" type="continuous"><parent link="a"/><child link="b"/><axis xyz="0 1 0"/></joint></robot>)";
  auto doc = UrdfDocument::parse(xml);
  CHECK(doc.joints[0].type == JointType::Revolute);
}

TEST_CASE("non-tree documents are rejected") {
  auto code = [](const std::string& xml) {
    try {
      UrdfDocument::parse(xml);
    } catch (const Error& e) {
      return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidInput;
  };
  const std::string links = R"(<link name="a"/><link name="b"/><link name="c"/>)";
  auto joint = [](const char* name, const char* p, const char* c) {
    return std::string("<joint name=\"") + name + "\" type=\"fixed\"><parent link=\"" + p + "\"/><child link=\"" +
           c + "\"/></joint>";
  };
  CHECK(code("<robot name=\"r\">" + links + joint("j1", "a", "c") + joint("j2", "b", "c") + "</robot>") ==
        ErrorCode::NonTreeStructure);
  CHECK(code("<robot name=\"r\">" + links + joint("j1", "a", "b") + "</robot>") == ErrorCode::NonTreeStructure);
  CHECK(code("<robot name=\"r\">" + links + joint("j1", "b", "c") + joint("j2", "c", "b") + "</robot>") ==
        ErrorCode::NonTreeStructure);
  CHECK(code("<robot name=\"r\">" + links + joint("j1", "a", "a") + joint("j2", "a", "b") + "</robot>") ==
        ErrorCode::NonTreeStructure);
}

TEST_CASE("malformed documents are parse errors") {
  auto code = [](const std::string& xml) {
    try {
      UrdfDocument::parse(xml);
    } catch (const Error& e) {
      return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidInput;
  };
  CHECK(code("<robot name=\"r\"><link name=\"a\">") == ErrorCode::ParseError);
  CHECK(code("<notarobot/>") == ErrorCode::ParseError);
  CHECK(code("<robot name=\"r\"></robot>") == ErrorCode::ParseError);
  CHECK(code("<robot name=\"r\"><link name=\"a\"/><link name=\"a\"/></robot>") == ErrorCode::ParseError);
  CHECK(code("<robot name=\"r\"><link name=\"a\"/><link name=\"b\"/><joint name=\"j\" type=\"revolute\">"
             "<parent link=\"a\"/><child link=\"zz\"/></joint></robot>") == ErrorCode::ParseError);
  CHECK(code("<robot name=\"r\"><link name=\"a\"/><link name=\"b\"/><joint name=\"j\" type=\"planar\">"
             "<parent link=\"a\"/><child link=\"b\"/></joint></robot>") == ErrorCode::ParseError);
  CHECK(code("<robot name=\"r\"><link name=\"a\"><visual><origin xyz=\"1 x 0\"/></visual></link></robot>") ==
        ErrorCode::ParseError);
  CHECK(code("<robot name=\"r\"><link name=\"a\"/><link name=\"b\"/><joint name=\"j\" type=\"fixed\">"
             "<origin xyz=\"0 0 0\" rpy=\"0 0 1\"/><parent link=\"a\"/><child link=\"b\"/></joint></robot>") ==
        ErrorCode::ParseError);
}

TEST_CASE("exported axes are unit length") {
  auto a = boxes(3);
  auto t = mixed_chain(a);
  t.edges()[0].joint.axis = Vec3(0.3, -0.2, 0.9).normalized() * (1 + 1e-7);
  auto doc = UrdfDocument::parse(build_urdf(t, a.parts, options_for(a)).to_xml());
  for (const auto& j : doc.joints)
    if (j.axis) CHECK(std::abs(j.axis->norm() - 1.0) < 1e-9);
}

TEST_CASE("reference mode points at the source meshes") {
  auto dir = scratch("reference");
  auto synth = generate_synthetic(Template::Door, 2);
  auto manifest = write_synthetic(synth, dir / "fixture");
  auto a = load_assembly(load_manifest(manifest));
  KinematicTree t(2, 0);
  TreeEdge e;
  e.parent = 0;
  e.child = 1;
  e.joint.origin = a.parts[1].centroid - a.parts[0].centroid;
  t.add_edge(e);
  auto o = options_for(a);
  o.mesh_mode = MeshMode::Reference;
  auto path = write_urdf(t, a.parts, dir / "out", o);
  auto doc = read_urdf_document(path);
  for (const auto& l : doc.links) CHECK(std::filesystem::exists(path.parent_path() / l.mesh));
  CHECK_FALSE(std::filesystem::exists(dir / "out" / "meshes"));
  CHECK(mesh_mode_from_string("reference") == MeshMode::Reference);
  CHECK_THROWS_AS(mesh_mode_from_string("link"), Error);
}
