#pragma once

#include "kintree/kinematics.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kintree {

enum class MeshMode { Copy, Reference };
std::string_view to_string(MeshMode m);
MeshMode mesh_mode_from_string(std::string_view s);

/// Link frames carry no rotation. A link's frame sits at its inbound joint's
/// pivot (revolute) or at its centroid (prismatic, fixed, root); meshes stay in
/// world coordinates and are offset by the visual origin.
struct UrdfLink {
  std::string name;
  std::string mesh;                  // filename as written in the document
  Vec3 visual_xyz = Vec3::Zero();    // minus the link frame's world position
  Vec3 inertial_xyz = Vec3::Zero();  // centroid in the link frame
  double mass = 0.0;
  Vec3 inertia = Vec3::Zero();  // ixx, iyy, izz; off-diagonal terms are 0
};

struct UrdfJoint {
  std::string name;
  JointType type = JointType::Fixed;
  std::string parent;
  std::string child;
  Vec3 xyz = Vec3::Zero();  // child frame in the parent frame
  std::optional<Vec3> axis;
  double lower = 0.0;  // limits, movable joints only
  double upper = 0.0;
  double effort = 0.0;
  double velocity = 0.0;
};

struct UrdfOptions {
  std::string robot_name = "kintree";
  double density = 1.0;
  double diagonal = 1.0;  // prismatic limits are +-0.1 of it
  MeshMode mesh_mode = MeshMode::Copy;
};

struct UrdfDocument {
  std::string robot;
  std::vector<UrdfLink> links;  // id order
  std::vector<UrdfJoint> joints;

  std::string to_xml() const;
  /// Throws ParseError on malformed documents, NonTreeStructure when joints do
  /// not form a single rooted tree.
  static UrdfDocument parse(std::string_view xml);

  /// Tree over link indices with joint specs in world coordinates.
  KinematicTree to_tree() const;
};

/// Link names derived from part names: sanitized and made unique.
std::vector<std::string> urdf_link_names(std::span<const PartRecord> parts);

UrdfDocument build_urdf(const KinematicTree& tree, std::span<const PartRecord> parts, const UrdfOptions& options);

/// Writes <out_dir>/<robot>.urdf plus meshes/<link>.obj in copy mode; returns the URDF path.
std::filesystem::path write_urdf(const KinematicTree& tree, std::span<const PartRecord> parts,
                                 const std::filesystem::path& out_dir, const UrdfOptions& options);

UrdfDocument read_urdf_document(const std::filesystem::path& path);
KinematicTree read_urdf(const std::filesystem::path& path);

}  // namespace kintree
