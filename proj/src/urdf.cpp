#include "kintree/urdf.hpp"

#include "kintree/error.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace kintree {

namespace pt = boost::property_tree;

std::string_view to_string(MeshMode m) { return m == MeshMode::Copy ? "copy" : "reference"; }

MeshMode mesh_mode_from_string(std::string_view s) {
  if (s == "copy") return MeshMode::Copy;
  if (s == "reference") return MeshMode::Reference;
  throw Error(ErrorCode::InvalidInput, "mesh mode must be copy or reference, got '" + std::string(s) + "'");
}

namespace {

constexpr double kSentinelEffort = 1e6;
constexpr double kSentinelVelocity = 1e6;

std::string num(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string vec(const Vec3& v) { return num(v.x()) + " " + num(v.y()) + " " + num(v.z()); }

double parse_num(std::string_view s, const char* what) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error(ErrorCode::ParseError, std::string("bad number for ") + what + ": '" + std::string(s) + "'");
  return v;
}

Vec3 parse_vec(const std::string& s, const char* what) {
  std::istringstream in(s);
  std::string tok;
  std::vector<double> vals;
  while (in >> tok) vals.push_back(parse_num(tok, what));
  if (vals.size() != 3) throw Error(ErrorCode::ParseError, std::string(what) + " needs 3 components: '" + s + "'");
  return Vec3(vals[0], vals[1], vals[2]);
}

pt::ptree& attr(pt::ptree& node, const char* key, const std::string& value) {
  node.put(std::string("<xmlattr>.") + key, value);
  return node;
}

pt::ptree origin_node(const Vec3& xyz) {
  pt::ptree n;
  attr(n, "xyz", vec(xyz));
  attr(n, "rpy", "0 0 0");
  return n;
}

std::string required_attr(const pt::ptree& node, const char* key, const char* element) {
  auto v = node.get_optional<std::string>(std::string("<xmlattr>.") + key);
  if (!v) throw Error(ErrorCode::ParseError, std::string(element) + " is missing attribute '" + key + "'");
  return *v;
}

Vec3 optional_origin(const pt::ptree& node) {
  auto o = node.get_child_optional("origin");
  if (!o) return Vec3::Zero();
  if (auto rpy = o->get_optional<std::string>("<xmlattr>.rpy")) {
    if (parse_vec(*rpy, "rpy").norm() != 0.0)
      throw Error(ErrorCode::ParseError, "rotated frames are not supported (rpy must be 0)");
  }
  auto xyz = o->get_optional<std::string>("<xmlattr>.xyz");
  return xyz ? parse_vec(*xyz, "xyz") : Vec3::Zero();
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
  return out;
}

}  // namespace

std::vector<std::string> urdf_link_names(std::span<const PartRecord> parts) {
  std::vector<std::string> names;
  std::set<std::string> used;
  for (const auto& p : parts) {
    std::string n = sanitize(p.name);
    if (n.empty()) n = "part" + std::to_string(p.id);
    if (used.count(n)) n += "_" + std::to_string(p.id);
    while (used.count(n)) n += "_";
    used.insert(n);
    names.push_back(n);
  }
  return names;
}

UrdfDocument build_urdf(const KinematicTree& tree, std::span<const PartRecord> parts, const UrdfOptions& options) {
  if (tree.node_count() != parts.size())
    throw Error(ErrorCode::InvalidTree, "tree has " + std::to_string(tree.node_count()) + " nodes but there are " +
                                            std::to_string(parts.size()) + " parts");
  tree.validate_spanning();
  if (!(options.density > 0) || !(options.diagonal > 0))
    throw Error(ErrorCode::InvalidInput, "density and diagonal must be > 0");
  const auto names = urdf_link_names(parts);
  const std::size_t n = parts.size();

  // World position of each link frame.
  std::vector<Vec3> frame(n);
  for (std::size_t i = 0; i < n; ++i) frame[i] = parts[i].centroid;
  for (const auto& e : tree.edges()) {
    JointSpec s = e.joint;
    s.normalize();
    if (s.type == JointType::Revolute) frame[e.child] = *s.pivot;
  }
  // Snap frames to a binary grid so joint offsets and their sums are exact and
  // a read-back document rebuilds the same frames bit for bit.
  double scale = 1.0;
  for (const auto& p : parts) scale = std::max(scale, p.centroid.cwiseAbs().maxCoeff());
  const int exp = std::ilogb(scale) + 1 + 8 - 52;
  for (auto& f : frame)
    for (int a = 0; a < 3; ++a) f[a] = std::ldexp(std::round(std::ldexp(f[a], -exp)), exp);

  UrdfDocument doc;
  doc.robot = options.robot_name;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = parts[i];
    UrdfLink l;
    l.name = names[i];
    l.mesh = "meshes/" + names[i] + ".obj";
    if (options.mesh_mode == MeshMode::Reference) {
      if (p.source.empty())
        throw Error(ErrorCode::InvalidInput, "part '" + p.name + "' has no source file to reference");
      l.mesh = p.source.generic_string();
    }
    l.visual_xyz = -frame[i];
    l.inertial_xyz = p.centroid - frame[i];
    l.mass = options.density * p.robust_volume;
    const Vec3 e = p.aabb_extents;
    l.inertia = l.mass / 12.0 *
                Vec3(e.y() * e.y() + e.z() * e.z(), e.x() * e.x() + e.z() * e.z(), e.x() * e.x() + e.y() * e.y());
    doc.links.push_back(std::move(l));
  }
  for (const auto& e : tree.edges()) {
    JointSpec s = e.joint;
    s.normalize();
    UrdfJoint j;
    j.name = names[e.parent] + "_to_" + names[e.child];
    j.type = s.type;
    j.parent = names[e.parent];
    j.child = names[e.child];
    j.xyz = frame[e.child] - frame[e.parent];
    if (s.type != JointType::Fixed) {
      j.axis = s.axis->normalized();
      j.effort = kSentinelEffort;
      j.velocity = kSentinelVelocity;
      const double lim = s.type == JointType::Revolute ? std::numbers::pi / 2 : 0.1 * options.diagonal;
      j.lower = -lim;
      j.upper = lim;
    }
    doc.joints.push_back(std::move(j));
  }
  return doc;
}

std::string UrdfDocument::to_xml() const {
  pt::ptree robot_node;
  attr(robot_node, "name", robot);
  for (const auto& l : links) {
    pt::ptree ln;
    attr(ln, "name", l.name);
    pt::ptree inertial;
    inertial.add_child("origin", origin_node(l.inertial_xyz));
    pt::ptree mass;
    attr(mass, "value", num(l.mass));
    inertial.add_child("mass", mass);
    pt::ptree inertia;
    attr(inertia, "ixx", num(l.inertia.x()));
    attr(inertia, "ixy", "0");
    attr(inertia, "ixz", "0");
    attr(inertia, "iyy", num(l.inertia.y()));
    attr(inertia, "iyz", "0");
    attr(inertia, "izz", num(l.inertia.z()));
    inertial.add_child("inertia", inertia);
    ln.add_child("inertial", inertial);
    for (const char* kind : {"visual", "collision"}) {
      pt::ptree v;
      v.add_child("origin", origin_node(l.visual_xyz));
      pt::ptree mesh;
      attr(mesh, "filename", l.mesh);
      pt::ptree geom;
      geom.add_child("mesh", mesh);
      v.add_child("geometry", geom);
      ln.add_child(kind, v);
    }
    robot_node.add_child("link", ln);
  }
  for (const auto& j : joints) {
    pt::ptree jn;
    attr(jn, "name", j.name);
    attr(jn, "type", std::string(to_string(j.type)));
    jn.add_child("origin", origin_node(j.xyz));
    pt::ptree parent, child;
    attr(parent, "link", j.parent);
    attr(child, "link", j.child);
    jn.add_child("parent", parent);
    jn.add_child("child", child);
    if (j.type != JointType::Fixed) {
      pt::ptree axis, limit, dyn;
      attr(axis, "xyz", vec(*j.axis));
      jn.add_child("axis", axis);
      attr(limit, "lower", num(j.lower));
      attr(limit, "upper", num(j.upper));
      attr(limit, "effort", num(j.effort));
      attr(limit, "velocity", num(j.velocity));
      jn.add_child("limit", limit);
      attr(dyn, "damping", "0");
      attr(dyn, "friction", "0");
      jn.add_child("dynamics", dyn);
    }
    robot_node.add_child("joint", jn);
  }
  pt::ptree root;
  root.add_child("robot", robot_node);
  std::ostringstream out;
  pt::write_xml(out, root, pt::xml_writer_make_settings<std::string>(' ', 2));
  return out.str();
}

UrdfDocument UrdfDocument::parse(std::string_view xml) {
  pt::ptree root;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, root, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed XML: ") + e.what());
  }
  auto robot_node = root.get_child_optional("robot");
  if (!robot_node) throw Error(ErrorCode::ParseError, "no <robot> element");
  UrdfDocument doc;
  doc.robot = required_attr(*robot_node, "name", "robot");
  std::map<std::string, std::size_t> index;
  try {
    for (const auto& [tag, node] : *robot_node) {
      if (tag == "link") {
        UrdfLink l;
        l.name = required_attr(node, "name", "link");
        if (index.count(l.name)) throw Error(ErrorCode::ParseError, "duplicate link '" + l.name + "'");
        if (auto in = node.get_child_optional("inertial")) {
          l.inertial_xyz = optional_origin(*in);
          if (auto m = in->get_optional<std::string>("mass.<xmlattr>.value")) l.mass = parse_num(*m, "mass");
          if (auto i = in->get_child_optional("inertia")) {
            l.inertia = Vec3(parse_num(required_attr(*i, "ixx", "inertia"), "ixx"),
                             parse_num(required_attr(*i, "iyy", "inertia"), "iyy"),
                             parse_num(required_attr(*i, "izz", "inertia"), "izz"));
          }
        }
        if (auto v = node.get_child_optional("visual")) {
          l.visual_xyz = optional_origin(*v);
          if (auto f = v->get_optional<std::string>("geometry.mesh.<xmlattr>.filename")) l.mesh = *f;
        }
        index[l.name] = doc.links.size();
        doc.links.push_back(std::move(l));
      } else if (tag == "joint") {
        UrdfJoint j;
        j.name = required_attr(node, "name", "joint");
        std::string type = required_attr(node, "type", "joint");
        if (type == "continuous") type = "revolute";
        try {
          j.type = joint_type_from_string(type);
        } catch (const Error&) {
          throw Error(ErrorCode::ParseError, "unsupported joint type '" + type + "'");
        }
        j.xyz = optional_origin(node);
        auto parent = node.get_child_optional("parent");
        auto child = node.get_child_optional("child");
        if (!parent || !child) throw Error(ErrorCode::ParseError, "joint '" + j.name + "' needs parent and child");
        j.parent = required_attr(*parent, "link", "parent");
        j.child = required_attr(*child, "link", "child");
        if (j.type != JointType::Fixed) {
          auto axis = node.get_optional<std::string>("axis.<xmlattr>.xyz");
          j.axis = axis ? parse_vec(*axis, "axis") : Vec3(1, 0, 0);  // URDF default axis
          if (!(j.axis->norm() > 1e-12)) throw Error(ErrorCode::ParseError, "joint '" + j.name + "' has a zero axis");
          if (auto lim = node.get_child_optional("limit")) {
            auto get = [&](const char* k) {
              auto v = lim->get_optional<std::string>(std::string("<xmlattr>.") + k);
              return v ? parse_num(*v, k) : 0.0;
            };
            j.lower = get("lower");
            j.upper = get("upper");
            j.effort = get("effort");
            j.velocity = get("velocity");
          }
        }
        doc.joints.push_back(std::move(j));
      }
    }
  } catch (const pt::ptree_error& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed URDF: ") + e.what());
  }
  if (doc.links.empty()) throw Error(ErrorCode::ParseError, "URDF has no links");
  std::vector<int> parent_of(doc.links.size(), -1);
  for (const auto& j : doc.joints) {
    auto p = index.find(j.parent), c = index.find(j.child);
    if (p == index.end() || c == index.end())
      throw Error(ErrorCode::ParseError, "joint '" + j.name + "' references an unknown link");
    if (parent_of[c->second] != -1)
      throw Error(ErrorCode::NonTreeStructure, "link '" + j.child + "' has more than one parent");
    if (p->second == c->second) throw Error(ErrorCode::NonTreeStructure, "joint '" + j.name + "' is a self loop");
    parent_of[c->second] = static_cast<int>(p->second);
  }
  if (doc.joints.size() + 1 != doc.links.size())
    throw Error(ErrorCode::NonTreeStructure, "joints do not connect every link to a single root");
  // Every link must reach the root without revisiting a node.
  for (std::size_t i = 0; i < doc.links.size(); ++i) {
    std::size_t steps = 0;
    for (int k = static_cast<int>(i); parent_of[k] != -1; k = parent_of[k])
      if (++steps > doc.links.size()) throw Error(ErrorCode::NonTreeStructure, "joint cycle");
  }
  return doc;
}

KinematicTree UrdfDocument::to_tree() const {
  std::map<std::string, PartId> index;
  for (std::size_t i = 0; i < links.size(); ++i) index[links[i].name] = static_cast<PartId>(i);
  std::vector<bool> has_parent(links.size(), false);
  for (const auto& j : joints) has_parent[index.at(j.child)] = true;
  PartId root = 0;
  while (has_parent[root]) ++root;

  // Link frames in world coordinates from the root down.
  std::vector<Vec3> frame(links.size(), Vec3::Zero());
  std::vector<const UrdfJoint*> inbound(links.size(), nullptr);
  for (const auto& j : joints) inbound[index.at(j.child)] = &j;
  frame[root] = -links[root].visual_xyz;
  std::vector<bool> done(links.size(), false);
  done[root] = true;
  for (std::size_t pass = 0; pass < links.size(); ++pass)
    for (std::size_t i = 0; i < links.size(); ++i)
      if (!done[i] && done[index.at(inbound[i]->parent)]) {
        frame[i] = frame[index.at(inbound[i]->parent)] + inbound[i]->xyz;
        done[i] = true;
      }
  auto centroid = [&](PartId i) { return Vec3(frame[i] + links[i].inertial_xyz); };

  KinematicTree tree(links.size(), root);
  for (const auto& j : joints) {
    TreeEdge e;
    e.parent = index.at(j.parent);
    e.child = index.at(j.child);
    e.joint.type = j.type;
    e.joint.origin = centroid(e.child) - centroid(e.parent);
    if (j.type != JointType::Fixed) e.joint.axis = j.axis->normalized();
    if (j.type == JointType::Revolute) e.joint.pivot = frame[e.child];
    tree.add_edge(std::move(e));
  }
  return tree;
}

std::filesystem::path write_urdf(const KinematicTree& tree, std::span<const PartRecord> parts,
                                 const std::filesystem::path& out_dir, const UrdfOptions& options) {
  UrdfDocument doc = build_urdf(tree, parts, options);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string());
  if (options.mesh_mode == MeshMode::Reference)
    for (std::size_t i = 0; i < parts.size(); ++i) {
      auto rel = std::filesystem::relative(std::filesystem::absolute(parts[i].source), std::filesystem::absolute(out_dir), ec);
      if (!ec && !rel.empty()) doc.links[i].mesh = rel.generic_string();
    }
  if (options.mesh_mode == MeshMode::Copy) {
    std::filesystem::create_directories(out_dir / "meshes", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + (out_dir / "meshes").string());
    for (std::size_t i = 0; i < parts.size(); ++i) save_obj(parts[i].mesh, out_dir / doc.links[i].mesh);
  }
  auto path = out_dir / (sanitize(options.robot_name) + ".urdf");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.to_xml();
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
  return path;
}

UrdfDocument read_urdf_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return UrdfDocument::parse(ss.str());
}

KinematicTree read_urdf(const std::filesystem::path& path) { return read_urdf_document(path).to_tree(); }

}  // namespace kintree
