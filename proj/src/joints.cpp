#include "kinemaforge/joints.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/SVD>
#include "json.hpp"

#include "kinemaforge/error.hpp"

using json = nlohmann::ordered_json;

namespace kf {

LinkPoseTrack link_pose_track(const std::vector<ClusterTrack>& tracks,
                              const KinematicTree& tree) {
  if (tracks.empty()) {
    throw Error(ErrorCode::EmptySequence, "link poses: no tracks");
  }
  const auto& base = tracks[0];

  LinkPoseTrack out;
  out.representative_cluster.resize(tree.links.size(), -1);
  for (const auto& link : tree.links) {
    std::size_t best_size = 0;
    int best = -1;
    for (int c : link.clusters) {
      std::size_t sz = base.local_points[static_cast<std::size_t>(c)].size();
      if (best < 0 || sz > best_size) {
        best = c;
        best_size = sz;
      }
    }
    if (best < 0) {
      throw Error(ErrorCode::ShapeMismatch,
                  "link " + std::to_string(link.id) + " has no clusters");
    }
    out.representative_cluster[static_cast<std::size_t>(link.id)] = best;
  }

  auto append_frames = [&](const ClusterTrack& track, std::size_t from) {
    for (std::size_t t = from; t < track.frame_count(); ++t) {
      std::vector<Pose> row(tree.links.size());
      for (std::size_t l = 0; l < tree.links.size(); ++l) {
        row[l] = track.poses[t][static_cast<std::size_t>(
            out.representative_cluster[l])];
      }
      out.poses.push_back(std::move(row));
    }
  };
  append_frames(base, 0);
  for (std::size_t i = 1; i < tracks.size(); ++i) {
    if (tracks[i].cluster_count() != base.cluster_count()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "link poses: tracks disagree on cluster count");
    }
    append_frames(tracks[i], 1);  // frame 0 repeats the shared rest state
  }
  return out;
}

std::vector<Transform3D> relative_transforms(const LinkPoseTrack& track,
                                             int parent, int child) {
  std::vector<Transform3D> out;
  out.reserve(track.frame_count());
  for (const auto& row : track.poses) {
    Transform3D hp = pose_to_transform(row[static_cast<std::size_t>(parent)]);
    Transform3D hc = pose_to_transform(row[static_cast<std::size_t>(child)]);
    out.push_back(hp.inverse() * hc);
  }
  return out;
}

RevoluteJoint estimate_joint(const std::vector<Transform3D>& rel,
                             const Eigen::Vector3d& child_ref, int parent,
                             int child, double min_angle, double limit_margin) {
  if (rel.size() < 2) {
    throw Error(ErrorCode::DegenerateTrack, "joint fit needs >= 2 frames");
  }
  const std::size_t T = rel.size();

  std::vector<Eigen::Matrix3d> dR(T);
  std::vector<AxisAngle> aa(T);
  std::vector<bool> reliable(T, false);
  std::size_t reliable_count = 0;
  for (std::size_t t = 0; t < T; ++t) {
    dR[t] = rel[t].R * rel[0].R.transpose();
    aa[t] = axis_angle_from_rotation(dR[t]);
    reliable[t] = !aa[t].near_zero && aa[t].angle >= min_angle;
    if (reliable[t]) ++reliable_count;
  }
  if (reliable_count == 0) {
    throw Error(ErrorCode::InsufficientMotion,
                "joint " + std::to_string(parent) + "->" +
                    std::to_string(child) + ": no frame rotates by >= " +
                    std::to_string(min_angle) + " rad");
  }

  // Angle-weighted axis average, sign-aligned to the first reliable sample.
  Eigen::Vector3d ref = Eigen::Vector3d::Zero();
  for (std::size_t t = 0; t < T; ++t) {
    if (reliable[t]) {
      ref = aa[t].axis;
      break;
    }
  }
  Eigen::Vector3d axis_sum = Eigen::Vector3d::Zero();
  for (std::size_t t = 0; t < T; ++t) {
    if (!reliable[t]) continue;
    Eigen::Vector3d a = aa[t].axis;
    if (a.dot(ref) < 0.0) a = -a;
    axis_sum += aa[t].angle * a;
  }
  if (axis_sum.norm() < 1e-12) {
    throw Error(ErrorCode::InsufficientMotion,
                "joint " + std::to_string(parent) + "->" +
                    std::to_string(child) + ": axis samples cancel out");
  }

  RevoluteJoint joint;
  joint.parent = parent;
  joint.child = child;
  joint.axis = axis_sum.normalized();

  // Joint center: every reliable frame contributes (I - dR(t)) c = t(t) -
  // dR(t) t(0).  The axis direction lies in the null space, so solve by SVD
  // pseudo-inverse (minimum-norm) and then slide c along the axis to the
  // point nearest the child's rest centroid.
  Eigen::MatrixXd A(3 * static_cast<long>(reliable_count), 3);
  Eigen::VectorXd b(3 * static_cast<long>(reliable_count));
  long row = 0;
  for (std::size_t t = 0; t < T; ++t) {
    if (!reliable[t]) continue;
    A.block<3, 3>(row, 0) = Eigen::Matrix3d::Identity() - dR[t];
    b.segment<3>(row) = rel[t].t - dR[t] * rel[0].t;
    row += 3;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  double tol = 1e-8 * svd.singularValues()(0);
  Eigen::Vector3d inv_sv = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i) {
    double s = svd.singularValues()(i);
    if (s > tol) inv_sv[i] = 1.0 / s;
  }
  Eigen::Vector3d c0 = svd.matrixV() *
                       (inv_sv.asDiagonal() * (svd.matrixU().transpose() * b));
  joint.origin = c0 + (child_ref - c0).dot(joint.axis) * joint.axis;

  // Signed per-frame angles about the fitted axis.
  joint.angles.resize(T, 0.0);
  double lo = 0.0, hi = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double theta = 0.0;
    if (!aa[t].near_zero) {
      theta = aa[t].angle * (aa[t].axis.dot(joint.axis) < 0.0 ? -1.0 : 1.0);
    }
    joint.angles[t] = theta;
    lo = std::min(lo, theta);
    hi = std::max(hi, theta);
  }
  joint.lower = lo - limit_margin;
  joint.upper = hi + limit_margin;
  return joint;
}

std::vector<RevoluteJoint> estimate_joints(
    const std::vector<ClusterTrack>& tracks, const KinematicTree& tree,
    const LinkPoseTrack& link_track) {
  const auto& base = tracks[0];

  // Rest centroid of each link's points (world frame = frame 0).
  std::vector<Eigen::Vector3d> rest_centroid(tree.links.size(),
                                             Eigen::Vector3d::Zero());
  for (const auto& link : tree.links) {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::size_t count = 0;
    for (int c : link.clusters) {
      Transform3D T = pose_to_transform(base.poses[0][static_cast<std::size_t>(c)]);
      for (const auto& p : base.local_points[static_cast<std::size_t>(c)].pts) {
        sum += T.apply(p);
        ++count;
      }
    }
    if (count == 0) {
      throw Error(ErrorCode::ShapeMismatch,
                  "link " + std::to_string(link.id) + " has no points");
    }
    rest_centroid[static_cast<std::size_t>(link.id)] =
        sum / static_cast<double>(count);
  }

  std::vector<RevoluteJoint> joints;
  for (const auto& [parent, child] : tree.edges()) {
    std::vector<Transform3D> rel = relative_transforms(link_track, parent, child);
    Transform3D hp0 =
        pose_to_transform(link_track.poses[0][static_cast<std::size_t>(parent)]);
    Eigen::Vector3d child_ref =
        hp0.inverse().apply(rest_centroid[static_cast<std::size_t>(child)]);
    joints.push_back(estimate_joint(rel, child_ref, parent, child));
  }
  return joints;
}

void save_joints(const std::filesystem::path& path,
                 const std::vector<RevoluteJoint>& joints) {
  json arr = json::array();
  for (const auto& j : joints) {
    arr.push_back(json{
        {"parent", j.parent},
        {"child", j.child},
        {"axis", {j.axis.x(), j.axis.y(), j.axis.z()}},
        {"origin", {j.origin.x(), j.origin.y(), j.origin.z()}},
        {"lower", j.lower},
        {"upper", j.upper},
        {"angles", j.angles},
    });
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << arr.dump(2) << "\n";
}

std::vector<RevoluteJoint> load_joints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    json arr;
    in >> arr;
    std::vector<RevoluteJoint> out;
    for (const auto& e : arr) {
      RevoluteJoint j;
      j.parent = e.at("parent").get<int>();
      j.child = e.at("child").get<int>();
      j.axis = {e.at("axis").at(0).get<double>(), e.at("axis").at(1).get<double>(),
                e.at("axis").at(2).get<double>()};
      j.origin = {e.at("origin").at(0).get<double>(),
                  e.at("origin").at(1).get<double>(),
                  e.at("origin").at(2).get<double>()};
      j.lower = e.at("lower").get<double>();
      j.upper = e.at("upper").get<double>();
      j.angles = e.at("angles").get<std::vector<double>>();
      out.push_back(std::move(j));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace kf
