#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace kf {

// Unit quaternion, scalar-first (w, x, y, z).  Operations that return a
// rotation keep the result normalized; sign is not canonicalized here because
// q and -q encode the same rotation and several callers rely on continuity
// rather than a fixed hemisphere.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quat identity() { return {1.0, 0.0, 0.0, 0.0}; }

  double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  double norm() const;
  Quat normalized() const;
  Quat conjugate() const { return {w, -x, -y, -z}; }
  Quat operator*(const Quat& o) const;  // Hamilton product
  Quat operator-() const { return {-w, -x, -y, -z}; }

  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const;
  Eigen::Matrix3d to_matrix() const;

  static Quat from_matrix(const Eigen::Matrix3d& R);
  static Quat from_axis_angle(const Eigen::Vector3d& axis, double angle);
};

// Geodesic angle between two rotations, in radians, in [0, pi].
double quat_geodesic(const Quat& a, const Quat& b);

struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Quat orientation;
};

// Rigid transform stored as rotation + translation (the 4x4 with bottom row
// [0 0 0 1] is implied).
struct Transform3D {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return R * p + t; }
  Transform3D operator*(const Transform3D& o) const {
    return {R * o.R, R * o.t + t};
  }
  Transform3D inverse() const {
    Eigen::Matrix3d Rt = R.transpose();
    return {Rt, -(Rt * t)};
  }
};

Transform3D pose_to_transform(const Pose& pose);
Pose transform_to_pose(const Transform3D& T);

// Axis-angle extracted from a rotation.  When the rotation is (numerically)
// the identity the axis is not observable; we report near_zero = true and
// return the +z axis as a placeholder rather than throwing, because callers
// usually just skip near-zero rotations.
struct AxisAngle {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double angle = 0.0;
  bool near_zero = true;
};

AxisAngle axis_angle_from_rotation(const Eigen::Matrix3d& R);
Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& axis, double angle);

// Continuous 6D rotation parameterization: the first two columns of a
// rotation matrix; decoding re-orthonormalizes with Gram-Schmidt.
struct Rot6D {
  Eigen::Vector3d a1 = Eigen::Vector3d::UnitX();
  Eigen::Vector3d a2 = Eigen::Vector3d::UnitY();
};

Rot6D rot6d_from_matrix(const Eigen::Matrix3d& R);
// Throws Error(DegenerateRotation) when a1 is (near) zero or a1, a2 are
// (near) colinear.
Eigen::Matrix3d rot6d_to_matrix(const Rot6D& r);

// Fixed-axis roll/pitch/yaw (URDF convention): R = Rz(yaw) * Ry(pitch) * Rx(roll).
Eigen::Matrix3d rpy_to_matrix(const Eigen::Vector3d& rpy);
Eigen::Vector3d matrix_to_rpy(const Eigen::Matrix3d& R);

}  // namespace kf
