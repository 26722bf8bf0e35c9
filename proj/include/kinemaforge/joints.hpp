#pragma once

#include <filesystem>
#include <vector>

#include "kinemaforge/registration.hpp"
#include "kinemaforge/topology.hpp"

namespace kf {

// Rigid pose of every link at every frame.  Each link is represented by one
// of its member clusters (the one with the most frame-0 points; lowest id on
// ties): any frame rigidly attached to the link yields the same joint
// estimates, so a representative is enough and avoids rotation averaging.
struct LinkPoseTrack {
  std::vector<std::vector<Pose>> poses;       // [frame][link]
  std::vector<int> representative_cluster;    // [link]

  std::size_t frame_count() const { return poses.size(); }
  std::size_t link_count() const { return representative_cluster.size(); }
};

// Builds the link pose track by concatenating the given tracks' frames in
// order (all tracks share the frame-0 cluster decomposition, so later tracks
// contribute their frames 1..T-1).
LinkPoseTrack link_pose_track(const std::vector<ClusterTrack>& tracks,
                              const KinematicTree& tree);

// Child-in-parent transforms H_p(t)^-1 * H_c(t) for every frame.
std::vector<Transform3D> relative_transforms(const LinkPoseTrack& track,
                                             int parent, int child);

struct RevoluteJoint {
  int parent = 0, child = 0;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();  // unit, in parent link frame
  Eigen::Vector3d origin = Eigen::Vector3d::Zero(); // point on axis, parent frame
  double lower = 0.0, upper = 0.0;                  // radians
  std::vector<double> angles;                       // per frame; angles[0] = 0
};

// Fits one revolute joint to the relative motion of a child link w.r.t. its
// parent.  Per frame the rotation displacement dR(t) = R(t) R(0)^T yields an
// axis-angle sample; frames with at least `min_angle` rotation vote for the
// axis (angle-weighted, sign-aligned) and constrain the joint center through
// (I - dR(t)) c = t(t) - dR(t) t(0), solved least-squares.  The component of
// c along the axis is unconstrained; it is fixed so c is the point closest to
// `child_ref` (child's rest centroid in parent frame).  Per-frame signed
// angles about the fitted axis become the motion range; limits expand it by
// `limit_margin` on both sides.  Throws InsufficientMotion when no frame
// reaches `min_angle`.
RevoluteJoint estimate_joint(const std::vector<Transform3D>& rel,
                             const Eigen::Vector3d& child_ref, int parent,
                             int child, double min_angle = 0.02,
                             double limit_margin = 5.0 * M_PI / 180.0);

// Fits joints for every edge of the tree.  The tracks provide the member
// points used for the child reference centroids.
std::vector<RevoluteJoint> estimate_joints(
    const std::vector<ClusterTrack>& tracks, const KinematicTree& tree,
    const LinkPoseTrack& link_track);

void save_joints(const std::filesystem::path& path,
                 const std::vector<RevoluteJoint>& joints);
std::vector<RevoluteJoint> load_joints(const std::filesystem::path& path);

}  // namespace kf
