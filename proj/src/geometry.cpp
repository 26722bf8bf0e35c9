#include "kinemaforge/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "kinemaforge/error.hpp"

namespace kf {

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quat Quat::normalized() const {
  double n = norm();
  if (n < 1e-300) return identity();
  return {w / n, x / n, y / n, z / n};
}

Quat Quat::operator*(const Quat& o) const {
  return {
      w * o.w - x * o.x - y * o.y - z * o.z,
      w * o.x + x * o.w + y * o.z - z * o.y,
      w * o.y - x * o.z + y * o.w + z * o.x,
      w * o.z + x * o.y - y * o.x + z * o.w,
  };
}

Eigen::Vector3d Quat::rotate(const Eigen::Vector3d& v) const {
  // q * (0, v) * q^-1 expanded: v + 2w(u x v) + 2 u x (u x v), u = (x,y,z).
  Eigen::Vector3d u(x, y, z);
  Eigen::Vector3d t = 2.0 * u.cross(v);
  return v + w * t + u.cross(t);
}

Eigen::Matrix3d Quat::to_matrix() const {
  double ww = w * w, xx = x * x, yy = y * y, zz = z * z;
  double n = ww + xx + yy + zz;
  if (n < 1e-300) return Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R;
  R << ww + xx - yy - zz, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), ww - xx + yy - zz, 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), ww - xx - yy + zz;
  return R / n;
}

Quat Quat::from_matrix(const Eigen::Matrix3d& R) {
  // Shepperd's method: pick the largest of the four squared components to
  // avoid catastrophic cancellation.
  double tr = R.trace();
  Quat q;
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (R(2, 1) - R(1, 2)) / s;
    q.y = (R(0, 2) - R(2, 0)) / s;
    q.z = (R(1, 0) - R(0, 1)) / s;
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    q.w = (R(2, 1) - R(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (R(0, 1) + R(1, 0)) / s;
    q.z = (R(0, 2) + R(2, 0)) / s;
  } else if (R(1, 1) > R(2, 2)) {
    double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
    q.w = (R(0, 2) - R(2, 0)) / s;
    q.x = (R(0, 1) + R(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (R(1, 2) + R(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
    q.w = (R(1, 0) - R(0, 1)) / s;
    q.x = (R(0, 2) + R(2, 0)) / s;
    q.y = (R(1, 2) + R(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q.normalized();
}

Quat Quat::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  double n = axis.norm();
  if (n < 1e-300) return identity();
  double h = 0.5 * angle;
  double s = std::sin(h) / n;
  return {std::cos(h), axis.x() * s, axis.y() * s, axis.z() * s};
}

double quat_geodesic(const Quat& a, const Quat& b) {
  double d = std::abs(a.normalized().dot(b.normalized()));
  d = std::min(d, 1.0);
  return 2.0 * std::acos(d);
}

Transform3D pose_to_transform(const Pose& pose) {
  return {pose.orientation.to_matrix(), pose.position};
}

Pose transform_to_pose(const Transform3D& T) {
  return {T.t, Quat::from_matrix(T.R)};
}

AxisAngle axis_angle_from_rotation(const Eigen::Matrix3d& R) {
  AxisAngle out;
  double c = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  double angle = std::acos(c);
  out.angle = angle;
  if (angle < 1e-8) {
    out.near_zero = true;
    out.axis = Eigen::Vector3d::UnitZ();
    return out;
  }
  out.near_zero = false;
  if (angle > M_PI - 1e-6) {
    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part R = 2*a*a^T - I (+ O(pi - angle)).
    Eigen::Matrix3d S = 0.5 * (R + Eigen::Matrix3d::Identity());
    int k;
    S.diagonal().maxCoeff(&k);
    Eigen::Vector3d a = S.col(k) / std::sqrt(std::max(S(k, k), 1e-300));
    a.normalize();
    // Fix the sign using the antisymmetric part when it is not exactly zero.
    Eigen::Vector3d w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    if (w.dot(a) < 0.0) a = -a;
    out.axis = a;
    return out;
  }
  double s = 2.0 * std::sin(angle);
  out.axis = Eigen::Vector3d(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0),
                             R(1, 0) - R(0, 1)) /
             s;
  out.axis.normalize();
  return out;
}

Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& axis,
                                         double angle) {
  double n = axis.norm();
  if (n < 1e-300) return Eigen::Matrix3d::Identity();
  Eigen::Vector3d a = axis / n;
  Eigen::Matrix3d K;
  K << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * K +
         (1.0 - std::cos(angle)) * (K * K);
}

Rot6D rot6d_from_matrix(const Eigen::Matrix3d& R) {
  return {R.col(0), R.col(1)};
}

Eigen::Matrix3d rot6d_to_matrix(const Rot6D& r) {
  double n1 = r.a1.norm();
  if (n1 < 1e-12) {
    throw Error(ErrorCode::DegenerateRotation, "6D rotation: first axis is zero");
  }
  Eigen::Vector3d b1 = r.a1 / n1;
  Eigen::Vector3d u2 = r.a2 - b1.dot(r.a2) * b1;
  double n2 = u2.norm();
  if (n2 < 1e-12) {
    throw Error(ErrorCode::DegenerateRotation,
                "6D rotation: axes are colinear");
  }
  Eigen::Vector3d b2 = u2 / n2;
  Eigen::Matrix3d R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b1.cross(b2);
  return R;
}

Eigen::Matrix3d rpy_to_matrix(const Eigen::Vector3d& rpy) {
  double cr = std::cos(rpy.x()), sr = std::sin(rpy.x());
  double cp = std::cos(rpy.y()), sp = std::sin(rpy.y());
  double cy = std::cos(rpy.z()), sy = std::sin(rpy.z());
  Eigen::Matrix3d R;
  R << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
      sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
      -sp, cp * sr, cp * cr;
  return R;
}

Eigen::Vector3d matrix_to_rpy(const Eigen::Matrix3d& R) {
  double sp = -R(2, 0);
  sp = std::clamp(sp, -1.0, 1.0);
  double pitch = std::asin(sp);
  double roll, yaw;
  if (std::abs(sp) > 1.0 - 1e-12) {
    // Gimbal lock: roll and yaw are coupled; put everything into yaw.
    roll = 0.0;
    yaw = std::atan2(-R(0, 1), R(1, 1));
  } else {
    roll = std::atan2(R(2, 1), R(2, 2));
    yaw = std::atan2(R(1, 0), R(0, 0));
  }
  return {roll, pitch, yaw};
}

}  // namespace kf
