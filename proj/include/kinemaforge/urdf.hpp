#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kinemaforge/joints.hpp"
#include "kinemaforge/meshing.hpp"
#include "kinemaforge/topology.hpp"

namespace kf {

// In-memory URDF restricted to the subset this project emits: mesh
// geometries, revolute joints, placeholder inertials.  Origins are kept as
// raw xyz/rpy numbers so that emit -> parse -> emit is byte-identical.
struct UrdfOrigin {
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
};

struct UrdfLink {
  std::string name;
  bool has_geometry = false;
  UrdfOrigin visual_origin;      // also used for collision
  std::string mesh_filename;     // relative to the URDF file
  bool has_inertial = true;
  double mass = 1.0;
  double ixx = 1e-3, iyy = 1e-3, izz = 1e-3;
};

struct UrdfJoint {
  std::string name;
  std::string type = "revolute";
  std::string parent, child;
  UrdfOrigin origin;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double lower = 0.0, upper = 0.0;
  double effort = 100.0, velocity = 10.0;  // required by the format; placeholders
};

struct UrdfModel {
  std::string name;
  std::vector<UrdfLink> links;    // pre-order (root first)
  std::vector<UrdfJoint> joints;  // pre-order by child link

  int link_index(const std::string& name) const;  // -1 if absent
  // Root link: appears as no joint's child.  Throws TreeJointMismatch if the
  // structure is not a single tree.
  int root_link() const;
};

// Assembles the URDF from the inferred tree, fitted joints, rest link poses
// (frame-0 link track poses) and per-link mesh files.  The root link frame is
// the scan world frame, every child link frame sits at its joint's center
// with the world rest orientation, so zero joint angles reproduce the scanned
// rest geometry exactly.  Throws TreeJointMismatch when joints do not match
// the tree edges one-to-one.
UrdfModel build_urdf(const KinematicTree& tree,
                     const std::vector<RevoluteJoint>& joints,
                     const std::vector<Pose>& rest_link_poses,
                     const std::vector<std::string>& mesh_files,
                     const std::string& name);

// Deterministic serialization: 2-space indent, fixed attribute order, numbers
// printed with %.9g.  emit(parse(emit(m))) == emit(m) byte for byte.
std::string emit_urdf(const UrdfModel& model);
UrdfModel parse_urdf(const std::string& xml);

void save_urdf(const std::filesystem::path& path, const UrdfModel& model);
UrdfModel load_urdf(const std::filesystem::path& path);

// Forward kinematics: world transform of every link frame for the given
// joint angles (by joint name; missing joints default to 0).  Angles outside
// a joint's limits are clamped, with a warning on stderr.  Angle names that
// match no joint throw UnknownJointName.
std::map<std::string, Transform3D> fk_frames(
    const UrdfModel& model, const std::map<std::string, double>& angles);

// Area-weighted surface samples over all link meshes, posed by fk_frames.
// `meshes` parallels model.links (empty meshes allowed for bare links); the
// path overload loads `meshes/...` references relative to `mesh_root`.
// Throws MissingMesh when no link has any surface, or when a referenced mesh
// file is absent.
PointCloud sample_surface(const UrdfModel& model,
                          const std::vector<TriangleMesh>& meshes,
                          const std::map<std::string, double>& angles,
                          std::size_t n, Rng& rng);
PointCloud sample_surface(const UrdfModel& model,
                          const std::filesystem::path& mesh_root,
                          const std::map<std::string, double>& angles,
                          std::size_t n, std::uint64_t seed);

}  // namespace kf
