#pragma once

// Evaluation: registration Chamfer, kinematic-tree edit distance, joint axis
// errors, and re-posed whole-surface Chamfer against the synthetic generator.
// Lengths are reported in millimeters (inputs are meters), angles in degrees.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinemaforge/meshing.hpp"
#include "kinemaforge/registration.hpp"
#include "kinemaforge/synthgen.hpp"
#include "kinemaforge/topology.hpp"
#include "kinemaforge/urdf.hpp"

namespace kf {

// Mean over frames 2..T of the Chamfer distance between the tracked model
// (frame-0 clusters placed by that frame's poses) and the observed frame.
struct CdResult {
  std::vector<double> per_frame_mm;  // frames 1..T-1, in order
  double mean_mm = 0.0;
};
CdResult metric_cd(const ClusterTrack& track, const FrameSequence& seq);

// Rooted tree with explicit child lists; used for structure-only comparisons.
struct TreeShape {
  int root = 0;
  std::vector<std::vector<int>> children;

  std::size_t size() const { return children.size(); }
};

TreeShape tree_from_parents(const std::vector<int>& parents);  // -1 marks root
TreeShape tree_shape(const KinematicTree& tree);
TreeShape tree_shape(const UrdfModel& model);

// Reorders every node's children by (subtree size, canonical string) so that
// sibling order never affects comparisons.
TreeShape canonicalize_tree(const TreeShape& tree);

// Ordered tree edit distance on anonymous nodes (insert/delete cost 1,
// relabel free) between the canonical forms, via the classic forest
// dynamic program.
int tree_edit_distance(const TreeShape& a, const TreeShape& b);

double metric_ted(const KinematicTree& predicted, const KinematicTree& truth);

// A joint's rest-configuration line in world coordinates, extracted from a
// robot model at the zero configuration.
struct WorldJoint {
  std::string name;
  int parent_link = 0, child_link = 0;  // indices into model.links
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double lower = 0.0, upper = 0.0;
};
std::vector<WorldJoint> world_joints(const UrdfModel& model);

// Angle between two axis lines (sign-invariant), radians in [0, pi/2].
double line_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b);
// Minimal distance between two infinite lines (common perpendicular; the
// point-to-line distance when they are parallel).
double line_distance(const Eigen::Vector3d& axis_a, const Eigen::Vector3d& point_a,
                     const Eigen::Vector3d& axis_b, const Eigen::Vector3d& point_b);

// Matches each predicted joint to the ground-truth joint whose child link
// shares the most frame-0 points with the predicted child part (ties: smaller
// axis angle, then lower truth index).  Returns one truth index per predicted
// joint, -1 when nothing overlaps.  Point sets are index lists into frame 0.
std::vector<int> match_joints(
    const std::vector<std::vector<std::size_t>>& pred_child_points,
    const std::vector<std::vector<std::size_t>>& truth_child_points,
    const std::vector<WorldJoint>& pred, const std::vector<WorldJoint>& truth);

struct JointErrorStats {
  double e_ja_deg = 0.0;  // mean arccos(|<axis, axis>|), degrees
  double e_jd_mm = 0.0;   // mean axis-line distance, millimeters
  int matched = 0;
};
// Throws NoCorrespondence when no predicted joint is matched.
JointErrorStats metric_joint(const std::vector<WorldJoint>& pred,
                             const std::vector<WorldJoint>& truth,
                             const std::vector<int>& truth_of_pred);

// Commands both models with random configurations and compares surface
// samples.  Per trial: ground-truth angles are drawn inside the intersection
// of the truth limits and the (sign-corrected) matched predicted limits, the
// same commands drive both models, and the Chamfer distance between n_points
// samples of each surface is recorded.  Unmatched predicted joints stay at
// zero; unmatched truth joints move within their own limits.  pred_meshes is
// indexed like pred.links.  Throws NoCorrespondence / InvalidConfig.
double metric_repose(const UrdfModel& pred,
                     const std::vector<TriangleMesh>& pred_meshes,
                     const RobotSpec& truth,
                     const std::vector<int>& truth_of_pred, int trials,
                     int n_points, std::uint64_t seed);

struct EvalReport {
  std::optional<double> cd_mm;
  std::optional<double> ted;
  std::optional<double> e_jd_mm;
  std::optional<double> e_ja_deg;
  std::optional<double> cd_r_mm;
};

void save_eval_report(const std::filesystem::path& path, const EvalReport& report);
EvalReport load_eval_report(const std::filesystem::path& path);

}  // namespace kf
