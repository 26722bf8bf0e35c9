#pragma once

// Synthetic articulated-robot generator: random link/joint specs, surface
// point sampling, trajectories, and rendered frame sequences with known
// ground truth.  Used by the CLI `synthgen` command and by the test suite.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinemaforge/geometry.hpp"
#include "kinemaforge/pointcloud.hpp"
#include "kinemaforge/rng.hpp"
#include "kinemaforge/urdf.hpp"

namespace kf {

enum class LinkShape { Box, Cylinder };

// A link occupies z in [0, length] in its own frame; the cross-section is
// centered on the z axis (width x depth for boxes, radius for cylinders).
struct SpecLink {
  LinkShape shape = LinkShape::Box;
  double length = 0.3;
  double width = 0.06;
  double depth = 0.06;
  double radius = 0.03;

  double surface_area() const;
};

// Child frame = parent frame * Translate(origin) * basis * Rot(axis, angle).
// The axis is expressed in the child frame.
struct SpecJoint {
  int parent = 0;
  int child = 1;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Matrix3d basis = Eigen::Matrix3d::Identity();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  double lower = -1.0;
  double upper = 1.0;
};

struct RobotSpec {
  std::vector<SpecLink> links;
  std::vector<SpecJoint> joints;  // joints[i].child == i + 1; link 0 is the base

  int dof() const { return static_cast<int>(joints.size()); }
};

// Serial: every link continues the chain.  Star: every link hangs off the
// base.  Mixed: even odds of continuing the chain or branching off a random
// earlier link.
enum class Branching { Serial, Star, Mixed };

struct SynthOptions {
  int num_links = 4;  // base included; the arm has num_links - 1 joints
  Branching branching = Branching::Serial;
  double base_length = 0.25;
  double min_length = 0.12;
  double max_length = 0.30;
  double min_thickness = 0.05;
  double max_thickness = 0.10;
  // Rejection-sampling constraints on joint axes: consecutive joints must not
  // be near-parallel, and an axis must not align with its link's long axis
  // (a cylinder spinning about its own axis is invisible to a scanner).
  double min_axis_separation = 15.0 * M_PI / 180.0;
  double min_axis_tilt = 20.0 * M_PI / 180.0;
};

RobotSpec random_robot_spec(const SynthOptions& opt, Rng& rng);

// dof + 1 links with the default dimension ranges; deterministic per seed.
RobotSpec random_chain(int dof, Branching branching, std::uint64_t seed);

// World transform of every link frame for the given joint angles.
std::vector<Transform3D> spec_fk(const RobotSpec& spec,
                                 const std::vector<double>& angles);

// Fixed per-link surface points ("material points"), expressed in link
// frames.  The budget is split across links proportionally to surface area.
std::vector<PointCloud> sample_material_points(const RobotSpec& spec,
                                               int total_points, Rng& rng);

// Joint-space trajectory: frame 0 is all zeros, after which each joint walks
// toward random waypoints inside its limits with per-frame steps clipped to
// max_step.  The first waypoint of every joint has |angle| >= min_first_target
// so that each degree of freedom actually moves.
std::vector<std::vector<double>> random_trajectory(const RobotSpec& spec,
                                                   int num_frames, Rng& rng,
                                                   double max_step = 0.12,
                                                   double min_first_target = 0.3);

struct GroundTruth {
  RobotSpec spec;
  std::vector<std::vector<double>> trajectory;  // [frame][joint]
  std::vector<std::vector<Pose>> link_poses;    // [frame][link], world frame
  std::vector<std::vector<int>> labels;         // [frame][point] -> link id
};

// Renders the material points through the trajectory.  noise_sigma adds
// isotropic Gaussian jitter per point; drift_sigma adds a rigid per-frame
// translation that is also baked into the reported link poses.
FrameSequence render_sequence(const RobotSpec& spec,
                              const std::vector<PointCloud>& material,
                              const std::vector<std::vector<double>>& trajectory,
                              double noise_sigma, double drift_sigma, Rng& rng,
                              GroundTruth* gt = nullptr);

// Drops points hidden from every one of k random view directions (z-buffer
// visibility on a direction-aligned grid), emulating a multi-view scan with
// limited coverage.  Filters the per-frame ground-truth labels to match.
// k <= 0 leaves everything untouched.
void apply_occlusion(FrameSequence& seq, GroundTruth* gt, int k,
                     std::uint64_t seed);

// Fresh surface samples at an arbitrary configuration (world frame).
PointCloud sample_spec_surface(const RobotSpec& spec,
                               const std::vector<double>& angles,
                               int total_points, Rng& rng);

// The generator's own robot description, for self-consistency checks.
UrdfModel urdf_from_spec(const RobotSpec& spec,
                         const std::string& name = "synthetic");

void save_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);
GroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace kf
