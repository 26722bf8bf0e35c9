#include <cmath>
#include <vector>

#include "doctest.h"
#include "kinemaforge/error.hpp"
#include "kinemaforge/joints.hpp"
#include "test_support.hpp"

using namespace kf;

namespace {

// Pose of a body hinged about the line {center + s*axis}, rotated by angle.
Pose hinge_pose(const Eigen::Vector3d& axis, const Eigen::Vector3d& center,
                double angle) {
  Pose p;
  p.orientation = Quat::from_axis_angle(axis, angle);
  p.position = center - p.orientation.rotate(center);
  return p;
}

std::vector<Transform3D> hinge_rel(const Eigen::Vector3d& axis,
                                   const Eigen::Vector3d& center,
                                   const std::vector<double>& angles) {
  std::vector<Transform3D> rel;
  for (double a : angles) rel.push_back(pose_to_transform(hinge_pose(axis, center, a)));
  return rel;
}

}  // namespace

TEST_SUITE("joints") {

TEST_CASE("relative transforms hand oracle") {
  LinkPoseTrack track;
  track.representative_cluster = {0, 1};
  track.poses.assign(2, std::vector<Pose>(2));
  // Frame 0: parent at +x, child above it and yawed 90 degrees.
  track.poses[0][0].position = {1.0, 0.0, 0.0};
  track.poses[0][1].position = {2.0, 1.0, 0.0};
  track.poses[0][1].orientation =
      Quat::from_axis_angle({0.0, 0.0, 1.0}, M_PI / 2.0);
  // Frame 1: both shifted by the same rigid motion -> same relative pose.
  Quat g = Quat::from_axis_angle(Eigen::Vector3d(1, 1, 0).normalized(), 0.7);
  for (int l = 0; l < 2; ++l) {
    track.poses[1][l].position =
        g.rotate(track.poses[0][l].position) + Eigen::Vector3d(0.1, -0.2, 0.3);
    track.poses[1][l].orientation = g * track.poses[0][l].orientation;
  }

  std::vector<Transform3D> rel = relative_transforms(track, 0, 1);
  REQUIRE(rel.size() == 2);
  // Parent frame is axis-aligned at frame 0, so the child-in-parent offset is
  // just the world offset (1, 1, 0) and the rotation the child's own yaw.
  CHECK((rel[0].t - Eigen::Vector3d(1, 1, 0)).norm() < 1e-12);
  Eigen::Matrix3d yaw =
      rotation_from_axis_angle({0.0, 0.0, 1.0}, M_PI / 2.0);
  CHECK((rel[0].R - yaw).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((rel[1].t - rel[0].t).norm() < 1e-12);
  CHECK((rel[1].R - rel[0].R).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("link pose track picks the largest cluster as representative") {
  ClusterTrack track;
  track.poses.assign(2, std::vector<Pose>(3));
  track.local_points.resize(3);
  track.local_points[0].pts.assign(2, Eigen::Vector3d::Zero());
  track.local_points[1].pts.assign(5, Eigen::Vector3d::Zero());
  track.local_points[2].pts.assign(3, Eigen::Vector3d::Zero());
  track.poses[1][1].position = {0.5, 0.0, 0.0};

  KinematicTree tree =
      infer_topology(2, {{0, 1, 1.0}}, 0, {0, 0, 1});
  LinkPoseTrack link_track = link_pose_track({track}, tree);
  CHECK(link_track.representative_cluster == std::vector<int>{1, 2});
  REQUIRE(link_track.frame_count() == 2);
  CHECK(link_track.poses[1][0].position.x() == doctest::Approx(0.5));

  // A second track appends only its frames past the shared rest frame.
  LinkPoseTrack merged = link_pose_track({track, track}, tree);
  CHECK(merged.frame_count() == 3);
}

TEST_CASE("joint estimation recovers an exact hinge") {
  Eigen::Vector3d axis = Eigen::Vector3d(1.0, 2.0, 2.0) / 3.0;
  Eigen::Vector3d center(0.3, -0.2, 0.5);
  std::vector<double> angles = {0.0, 0.2, 0.4, -0.3};
  std::vector<Transform3D> rel = hinge_rel(axis, center, angles);

  Eigen::Vector3d child_ref(0.0, 0.0, 0.0);
  RevoluteJoint j = estimate_joint(rel, child_ref, 3, 7);
  CHECK(j.parent == 3);
  CHECK(j.child == 7);
  CHECK(j.axis.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((j.axis - axis).norm() < 1e-9);

  // The along-axis component is pinned to the point closest to child_ref.
  Eigen::Vector3d expected_origin =
      center + (child_ref - center).dot(axis) * axis;
  CHECK((j.origin - expected_origin).norm() < 1e-9);

  REQUIRE(j.angles.size() == angles.size());
  for (std::size_t t = 0; t < angles.size(); ++t) {
    CHECK(j.angles[t] == doctest::Approx(angles[t]).epsilon(1e-9));
    // The fitted joint replays each frame's rotation displacement.
    Eigen::Matrix3d replay = rotation_from_axis_angle(j.axis, j.angles[t]);
    CHECK((replay - rel[t].R).cwiseAbs().maxCoeff() < 1e-9);
  }

  const double margin = 5.0 * M_PI / 180.0;
  CHECK(j.lower == doctest::Approx(-0.3 - margin).epsilon(1e-9));
  CHECK(j.upper == doctest::Approx(0.4 + margin).epsilon(1e-9));
}

TEST_CASE("joint estimation is insensitive to the axis sign of samples") {
  // Motion entirely toward negative angles still yields a consistent
  // axis/angle pairing: axis may flip, but axis*angle must match.
  Eigen::Vector3d axis(0.0, 0.0, 1.0);
  Eigen::Vector3d center(1.0, 0.0, 0.0);
  std::vector<double> angles = {0.0, -0.25, -0.5};
  RevoluteJoint j = estimate_joint(hinge_rel(axis, center, angles), center, 0, 1);
  for (std::size_t t = 0; t < angles.size(); ++t) {
    Eigen::Vector3d want = axis * angles[t];
    CHECK((j.axis * j.angles[t] - want).norm() < 1e-9);
  }
  CHECK(j.upper - j.lower ==
        doctest::Approx(0.5 + 10.0 * M_PI / 180.0).epsilon(1e-9));
}

TEST_CASE("joint estimation requires enough motion") {
  Eigen::Vector3d axis(0.0, 1.0, 0.0);
  Eigen::Vector3d center(0.0, 0.0, 0.0);
  std::vector<double> tiny = {0.0, 0.01, -0.015};
  CHECK_THROWS_AS(estimate_joint(hinge_rel(axis, center, tiny), center, 0, 1),
                  Error);
  // The same motion passes once the gate is lowered.
  RevoluteJoint j =
      estimate_joint(hinge_rel(axis, center, tiny), center, 0, 1, 0.005);
  CHECK((j.axis * j.angles[2] - axis * (-0.015)).norm() < 1e-9);
}

TEST_CASE("tree wide estimation on a two link scene") {
  Eigen::Vector3d axis = Eigen::Vector3d(0.0, 1.0, 1.0).normalized();
  Eigen::Vector3d center(0.4, 0.1, -0.2);
  std::vector<double> angles = {0.0, 0.25, -0.2, 0.45};

  ClusterTrack track;
  track.poses.assign(angles.size(), std::vector<Pose>(2));
  for (std::size_t t = 0; t < angles.size(); ++t) {
    track.poses[t][1] = hinge_pose(axis, center, angles[t]);
  }
  track.local_points.resize(2);
  track.local_points[0].pts = {{-0.5, 0.0, 0.0}, {-0.7, 0.1, 0.0}};
  // Child points with a known rest centroid (poses at frame 0 are identity,
  // so world rest centroid == local mean).
  track.local_points[1].pts = {{0.2, 0.0, 0.0}, {0.0, 0.1, 0.0}, {0.1, -0.1, 0.0}};
  Eigen::Vector3d child_rest(0.1, 0.0, 0.0);

  KinematicTree tree = infer_topology(2, {{0, 1, 1.0}}, 0, {0, 1});
  LinkPoseTrack link_track = link_pose_track({track}, tree);
  std::vector<RevoluteJoint> joints = estimate_joints({track}, tree, link_track);
  REQUIRE(joints.size() == 1);
  const RevoluteJoint& j = joints[0];
  CHECK(j.parent == 0);
  CHECK(j.child == 1);
  CHECK((j.axis - axis).norm() < 1e-9);
  Eigen::Vector3d expected_origin =
      center + (child_rest - center).dot(axis) * axis;
  CHECK((j.origin - expected_origin).norm() < 1e-9);
  for (std::size_t t = 0; t < angles.size(); ++t) {
    CHECK(j.angles[t] == doctest::Approx(angles[t]).epsilon(1e-9));
  }
}

TEST_CASE("joint list round trip") {
  Eigen::Vector3d axis = Eigen::Vector3d(2.0, -1.0, 0.5).normalized();
  Eigen::Vector3d center(0.25, 0.75, -0.5);
  RevoluteJoint j =
      estimate_joint(hinge_rel(axis, center, {0.0, 0.3, 0.6}), center, 0, 2);

  kftest::TempDir tmp("joints");
  save_joints(tmp.path / "joints.json", {j});
  std::vector<RevoluteJoint> back = load_joints(tmp.path / "joints.json");
  REQUIRE(back.size() == 1);
  CHECK(back[0].parent == j.parent);
  CHECK(back[0].child == j.child);
  CHECK(kftest::same_xyz(back[0].axis, j.axis));
  CHECK(kftest::same_xyz(back[0].origin, j.origin));
  CHECK(back[0].lower == j.lower);
  CHECK(back[0].upper == j.upper);
  CHECK(back[0].angles == j.angles);
}

}  // TEST_SUITE
