#include "kinemaforge/registration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "kinemaforge/error.hpp"
#include "kinemaforge/parallel.hpp"
#include "kinemaforge/rng.hpp"

using json = nlohmann::ordered_json;

namespace kf {

namespace {

inline Eigen::Vector3d sign3(const Eigen::Vector3d& v) {
  auto s = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
  return {s(v.x()), s(v.y()), s(v.z())};
}

std::vector<Eigen::Vector3d> positions_of(const std::vector<Pose>& poses) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back(p.position);
  return out;
}

// Per-iteration state for one Chamfer optimization; buffers are reused so the
// inner loop does not allocate.
struct LossWorkspace {
  PointCloud transformed;             // all clusters, cluster-major order
  std::vector<std::size_t> offsets;   // cluster start offsets into transformed
  KdTree tree;
  std::vector<Eigen::Vector3d> point_grad;
  std::vector<double> dist_a, dist_b;
  std::vector<std::size_t> nn_b;
};

// Transforms locals by (R, t) per cluster, computes the symmetric L1 Chamfer
// loss against target, and (when with_grad) the gradient w.r.t. every
// transformed point, using this iteration's correspondences.
double chamfer_loss(const std::vector<Eigen::Matrix3d>& R,
                    const std::vector<Eigen::Vector3d>& t,
                    const std::vector<PointCloud>& locals,
                    const PointCloud& target, const KdTree& target_tree,
                    LossWorkspace& ws, bool with_grad) {
  const std::size_t s = locals.size();
  std::size_t total = 0;
  ws.offsets.assign(s + 1, 0);
  for (std::size_t c = 0; c < s; ++c) {
    ws.offsets[c] = total;
    total += locals[c].size();
  }
  ws.offsets[s] = total;
  if (total == 0) {
    throw Error(ErrorCode::EmptyCloud, "registration: no points to transform");
  }

  ws.transformed.pts.resize(total);
  for (std::size_t c = 0; c < s; ++c) {
    std::size_t off = ws.offsets[c];
    const auto& pts = locals[c].pts;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      ws.transformed.pts[off + i] = R[c] * pts[i] + t[c];
    }
  }
  ws.tree.build(ws.transformed);

  const double denom = static_cast<double>(total + target.size());
  ws.dist_a.resize(total);
  ws.dist_b.resize(target.size());
  if (with_grad) {
    ws.point_grad.assign(total, Eigen::Vector3d::Zero());
  }
  ws.nn_b.resize(target.size());

  // Transformed -> target direction.
  parallel_for(total, [&](std::size_t i) {
    const Eigen::Vector3d& u = ws.transformed.pts[i];
    NnResult nn = target_tree.nearest_l1(u);
    const Eigen::Vector3d& y = target.pts[nn.index];
    ws.dist_a[i] = nn.distance;
    if (with_grad) ws.point_grad[i] = sign3(u - y) / denom;
  });
  // Target -> transformed direction.
  parallel_for(target.size(), [&](std::size_t j) {
    NnResult nn = ws.tree.nearest_l1(target.pts[j]);
    ws.dist_b[j] = nn.distance;
    ws.nn_b[j] = nn.index;
  });
  if (with_grad) {
    // Scatter pass is sequential: multiple targets can share one neighbour.
    for (std::size_t j = 0; j < target.size(); ++j) {
      std::size_t i = ws.nn_b[j];
      ws.point_grad[i] += sign3(ws.transformed.pts[i] - target.pts[j]) / denom;
    }
  }

  double sum = 0.0;
  for (double d : ws.dist_a) sum += d;
  for (double d : ws.dist_b) sum += d;
  return sum / denom;
}

Quat aligned_unit_quat(const Quat& raw, const Quat& reference) {
  Quat q = raw.normalized();
  if (q.dot(reference) < 0.0) q = -q;
  return q;
}

}  // namespace

OptimizeResult optimize_poses(PoseRegressor& net, const std::vector<Pose>& init,
                              const std::vector<PointCloud>& locals,
                              const PointCloud& target,
                              const PoseNormalizer& norm,
                              const RegressorConfig& cfg, double lr) {
  const std::size_t s = init.size();
  if (s == 0) throw Error(ErrorCode::InvalidConfig, "optimize: no clusters");
  if (locals.size() != s) {
    throw Error(ErrorCode::ShapeMismatch, "optimize: locals/poses mismatch");
  }
  if (target.empty()) {
    throw Error(ErrorCode::EmptyCloud, "optimize: empty target");
  }
  const int rot_dim = net.rot_dim();
  const bool use_quat = cfg.rotation_repr == RotationRepr::Quaternion;

  KdTree target_tree(target);
  LossWorkspace ws;

  // Constant per-call inputs.
  std::vector<Eigen::VectorXd> encoded(s);
  std::vector<Eigen::VectorXd> rot_in(s);
  std::vector<Eigen::Vector3d> pos_in(s);
  for (std::size_t c = 0; c < s; ++c) {
    Eigen::VectorXd v = net.input_repr(init[c], norm);
    encoded[c] = net.encode(v);
    pos_in[c] = init[c].position;
    rot_in[c] = v.tail(rot_dim);
  }

  // Direct mode optimizes the raw pose coefficients instead of the network.
  const int dof = 3 + rot_dim;
  std::vector<double> direct_params;
  std::vector<double> direct_grads;
  if (cfg.direct) {
    direct_params.resize(s * static_cast<std::size_t>(dof));
    for (std::size_t c = 0; c < s; ++c) {
      double* p = direct_params.data() + c * static_cast<std::size_t>(dof);
      p[0] = pos_in[c].x();
      p[1] = pos_in[c].y();
      p[2] = pos_in[c].z();
      for (int k = 0; k < rot_dim; ++k) p[3 + k] = rot_in[c][k];
    }
    direct_grads.assign(direct_params.size(), 0.0);
  }
  AdamState adam(cfg.direct ? direct_params.size() : net.param_count());

  std::vector<PoseRegressor::Cache> caches(s);
  std::vector<Eigen::Matrix3d> R(s);
  std::vector<Eigen::Vector3d> t(s);
  std::vector<Eigen::VectorXd> rot_raw(s);

  // Evaluate one parameter state; fills R, t, rot_raw (and caches in network
  // mode).
  auto eval_poses = [&]() {
    if (cfg.direct) {
      for (std::size_t c = 0; c < s; ++c) {
        const double* p = direct_params.data() + c * static_cast<std::size_t>(dof);
        t[c] = {p[0], p[1], p[2]};
        rot_raw[c].resize(rot_dim);
        for (int k = 0; k < rot_dim; ++k) rot_raw[c][k] = p[3 + k];
        if (use_quat) {
          R[c] = rot_hom_matrix(
              {rot_raw[c][0], rot_raw[c][1], rot_raw[c][2], rot_raw[c][3]});
        } else {
          R[c] = rot6d_to_matrix(
              {rot_raw[c].head<3>(), rot_raw[c].tail<3>()});
        }
      }
      return;
    }
    for (std::size_t c = 0; c < s; ++c) {
      Eigen::Vector3d res_pos;
      Eigen::VectorXd res_rot;
      net.forward(encoded[c], caches[c], res_pos, res_rot);
      t[c] = pos_in[c] + norm.scale * res_pos;
      rot_raw[c] = rot_in[c] + res_rot;
      if (use_quat) {
        R[c] = rot_hom_matrix(
            {rot_raw[c][0], rot_raw[c][1], rot_raw[c][2], rot_raw[c][3]});
      } else {
        R[c] = rot6d_to_matrix({rot_raw[c].head<3>(), rot_raw[c].tail<3>()});
      }
    }
  };

  auto snapshot_poses = [&]() {
    std::vector<Pose> out(s);
    for (std::size_t c = 0; c < s; ++c) {
      out[c].position = t[c];
      Quat q;
      if (use_quat) {
        q = Quat{rot_raw[c][0], rot_raw[c][1], rot_raw[c][2], rot_raw[c][3]};
      } else {
        q = Quat::from_matrix(R[c]);
      }
      out[c].orientation = aligned_unit_quat(q, init[c].orientation);
    }
    return out;
  };

  OptimizeResult result;

  // Loss of the input poses themselves: baseline for best-so-far tracking and
  // the divergence guard.
  for (std::size_t c = 0; c < s; ++c) {
    R[c] = init[c].orientation.to_matrix();
    t[c] = init[c].position;
    rot_raw[c] = rot_in[c];
  }
  double loss0 = chamfer_loss(R, t, locals, target, target_tree, ws, false);
  result.best_loss = loss0;
  result.poses = snapshot_poses();
  result.curve.push_back(loss0);

  int last_improve = 0;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    eval_poses();
    double loss = chamfer_loss(R, t, locals, target, target_tree, ws, true);
    result.curve.push_back(loss);

    if (!std::isfinite(loss) ||
        (loss > cfg.divergence_factor * loss0 && loss > loss0 + 1e-6)) {
      throw Error(ErrorCode::DivergedOptimization,
                  "loss " + std::to_string(loss) + " vs initial " +
                      std::to_string(loss0));
    }
    if (loss < result.best_loss) {
      result.best_loss = loss;
      result.poses = snapshot_poses();
      last_improve = iter;
    }
    if (iter - last_improve >= cfg.patience) break;
    if (iter == cfg.max_iters) break;

    // Per-cluster pose gradients from the per-point gradients.
    if (cfg.direct) {
      std::fill(direct_grads.begin(), direct_grads.end(), 0.0);
    } else {
      net.zero_grads();
    }
    for (std::size_t c = 0; c < s; ++c) {
      Eigen::Vector3d d_t = Eigen::Vector3d::Zero();
      Eigen::Matrix3d d_R = Eigen::Matrix3d::Zero();
      const auto& pts = locals[c].pts;
      std::size_t off = ws.offsets[c];
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const Eigen::Vector3d& g = ws.point_grad[off + i];
        d_t += g;
        d_R.noalias() += g * pts[i].transpose();
      }
      Eigen::VectorXd d_rot(rot_dim);
      if (use_quat) {
        Eigen::Vector4d dq = rot_hom_backward(
            {rot_raw[c][0], rot_raw[c][1], rot_raw[c][2], rot_raw[c][3]}, d_R);
        d_rot = dq;
      } else {
        d_rot = rot6d_backward({rot_raw[c].head<3>(), rot_raw[c].tail<3>()}, d_R);
      }
      if (cfg.direct) {
        double* g = direct_grads.data() + c * static_cast<std::size_t>(dof);
        g[0] += d_t.x();
        g[1] += d_t.y();
        g[2] += d_t.z();
        for (int k = 0; k < rot_dim; ++k) g[3 + k] += d_rot[k];
      } else {
        net.backward(caches[c], norm.scale * d_t, d_rot);
      }
    }
    if (cfg.direct) {
      adam.step(direct_params, direct_grads, lr);
    } else {
      adam.step(net.params(), net.grads(), lr);
    }
  }
  return result;
}

double registration_loss_grad(PoseRegressor& net, const std::vector<Pose>& init,
                              const std::vector<PointCloud>& locals,
                              const PointCloud& target,
                              const PoseNormalizer& norm) {
  const std::size_t s = init.size();
  if (s == 0 || locals.size() != s) {
    throw Error(ErrorCode::ShapeMismatch, "loss_grad: locals/poses mismatch");
  }
  if (target.empty()) {
    throw Error(ErrorCode::EmptyCloud, "loss_grad: empty target");
  }
  const int rot_dim = net.rot_dim();
  const bool use_quat = rot_dim == 4;

  KdTree target_tree(target);
  LossWorkspace ws;
  std::vector<PoseRegressor::Cache> caches(s);
  std::vector<Eigen::Matrix3d> R(s);
  std::vector<Eigen::Vector3d> t(s);
  std::vector<Eigen::VectorXd> rot_raw(s);
  for (std::size_t c = 0; c < s; ++c) {
    Eigen::VectorXd v = net.input_repr(init[c], norm);
    Eigen::VectorXd encoded = net.encode(v);
    Eigen::Vector3d res_pos;
    Eigen::VectorXd res_rot;
    net.forward(encoded, caches[c], res_pos, res_rot);
    t[c] = init[c].position + norm.scale * res_pos;
    rot_raw[c] = v.tail(rot_dim) + res_rot;
    if (use_quat) {
      R[c] = rot_hom_matrix(
          {rot_raw[c][0], rot_raw[c][1], rot_raw[c][2], rot_raw[c][3]});
    } else {
      R[c] = rot6d_to_matrix({rot_raw[c].head<3>(), rot_raw[c].tail<3>()});
    }
  }
  double loss = chamfer_loss(R, t, locals, target, target_tree, ws, true);
  net.zero_grads();
  for (std::size_t c = 0; c < s; ++c) {
    Eigen::Vector3d d_t = Eigen::Vector3d::Zero();
    Eigen::Matrix3d d_R = Eigen::Matrix3d::Zero();
    const auto& pts = locals[c].pts;
    std::size_t off = ws.offsets[c];
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Eigen::Vector3d& g = ws.point_grad[off + i];
      d_t += g;
      d_R.noalias() += g * pts[i].transpose();
    }
    Eigen::VectorXd d_rot(rot_dim);
    if (use_quat) {
      d_rot = rot_hom_backward(
          {rot_raw[c][0], rot_raw[c][1], rot_raw[c][2], rot_raw[c][3]}, d_R);
    } else {
      d_rot = rot6d_backward({rot_raw[c].head<3>(), rot_raw[c].tail<3>()}, d_R);
    }
    net.backward(caches[c], norm.scale * d_t, d_rot);
  }
  return loss;
}

// Sequence registration -----------------------------------------------------

namespace {

std::vector<PointCloud> locals_from_frame(const PointCloud& frame,
                                          const ClusterAssignment& assignment,
                                          const std::vector<Pose>& poses) {
  std::vector<PointCloud> out(poses.size());
  std::vector<Transform3D> inv(poses.size());
  for (std::size_t c = 0; c < poses.size(); ++c) {
    inv[c] = pose_to_transform(poses[c]).inverse();
  }
  for (std::size_t i = 0; i < frame.size(); ++i) {
    std::size_t c = static_cast<std::size_t>(assignment.labels[i]);
    out[c].pts.push_back(inv[c].apply(frame.pts[i]));
  }
  return out;
}

ClusterTrack register_common(const FrameSequence& seq,
                             const InitialClusters& init,
                             ClusterAssignment first_membership,
                             const RegressorConfig& cfg, std::uint64_t seed) {
  if (seq.frames.size() < 2) {
    throw Error(ErrorCode::EmptySequence,
                "registration needs at least 2 frames, got " +
                    std::to_string(seq.frames.size()));
  }
  const std::size_t num_frames = seq.frames.size();
  const std::size_t s = init.poses0.size();

  ClusterTrack track;
  track.source_id = seq.source_id;
  track.local_points = init.local_points;
  track.poses.resize(num_frames);
  track.poses[0] = init.poses0;
  track.memberships.resize(num_frames);
  track.memberships[0] = std::move(first_membership);

  PoseRegressor step_net(cfg, derive_seed(seed, "step-net"));
  PoseRegressor anchor_net(cfg, derive_seed(seed, "anchor-net"));

  const double fail_threshold = 0.1 * init.norm.scale;

  for (std::size_t t = 0; t + 1 < num_frames; ++t) {
    const PointCloud& target = seq.frames[t + 1];
    std::vector<PointCloud> locals_t = locals_from_frame(
        seq.frames[t], track.memberships[t], track.poses[t]);

    OptimizeResult step = optimize_poses(step_net, track.poses[t], locals_t,
                                         target, init.norm, cfg, cfg.lr_step);

    ClusterAssignment assignment =
        kmeans_fixed_centers(target, positions_of(step.poses));

    std::vector<Pose> final_poses;
    double final_loss;
    if (cfg.use_anchor) {
      OptimizeResult anchor =
          optimize_poses(anchor_net, step.poses, init.local_points, target,
                         init.norm, cfg, cfg.lr_anchor);
      final_poses = std::move(anchor.poses);
      final_loss = anchor.best_loss;
      track.anchor_loss.push_back(std::move(anchor.curve));
    } else {
      final_poses = std::move(step.poses);
      // Report the same quantity the anchor path reports: Chamfer distance
      // between the frame-0 clusters at these poses and the target frame.
      PointCloud placed;
      for (std::size_t c = 0; c < s; ++c) {
        Transform3D T = pose_to_transform(final_poses[c]);
        for (const auto& p : init.local_points[c].pts) {
          placed.pts.push_back(T.apply(p));
        }
      }
      final_loss = chamfer_l1(placed, target);
      track.anchor_loss.emplace_back();
    }
    track.step_loss.push_back(std::move(step.curve));
    track.final_loss.push_back(final_loss);

    // Keep quaternion signs continuous along the track.
    for (std::size_t c = 0; c < s; ++c) {
      if (final_poses[c].orientation.dot(track.poses[t][c].orientation) < 0.0) {
        final_poses[c].orientation = -final_poses[c].orientation;
      }
    }
    track.poses[t + 1] = std::move(final_poses);
    track.memberships[t + 1] = std::move(assignment);

    if (final_loss > fail_threshold) {
      throw Error(ErrorCode::RegistrationFailed,
                  "frame " + std::to_string(t + 1) + ": residual " +
                      std::to_string(final_loss) + " exceeds " +
                      std::to_string(fail_threshold));
    }
  }
  return track;
}

}  // namespace

InitialClusters initial_clusters_from_track(const ClusterTrack& track) {
  InitialClusters init;
  init.poses0 = track.poses[0];
  init.local_points = track.local_points;
  // Reconstruct the normalizer from the frame-0 cluster geometry.
  PointCloud frame0;
  for (std::size_t c = 0; c < track.local_points.size(); ++c) {
    Transform3D T = pose_to_transform(track.poses[0][c]);
    for (const auto& p : track.local_points[c].pts) {
      frame0.pts.push_back(T.apply(p));
    }
  }
  Bbox b = bbox(frame0);
  init.norm.center = b.center();
  init.norm.scale = b.diagonal();
  return init;
}

ClusterTrack register_sequence(const FrameSequence& seq, int s,
                               const RegressorConfig& cfg, std::uint64_t seed) {
  if (seq.frames.empty()) {
    throw Error(ErrorCode::EmptySequence, "empty sequence: " + seq.source_id);
  }
  const PointCloud& frame0 = seq.frames[0];
  ClusterAssignment assignment =
      kmeans_pp(frame0, s, derive_seed(seed, "kmeans"));

  InitialClusters init;
  Bbox b = bbox(frame0);
  if (b.diagonal() < 1e-9) {
    throw Error(ErrorCode::DegenerateCloud,
                "frame 0 bounding box has (near) zero diagonal");
  }
  init.norm.center = b.center();
  init.norm.scale = b.diagonal();
  init.poses0.resize(static_cast<std::size_t>(s));
  for (int c = 0; c < s; ++c) {
    init.poses0[static_cast<std::size_t>(c)].position =
        assignment.centers[static_cast<std::size_t>(c)];
    init.poses0[static_cast<std::size_t>(c)].orientation = Quat::identity();
  }
  init.local_points =
      locals_from_frame(frame0, assignment, init.poses0);
  for (const auto& lp : init.local_points) {
    if (lp.empty()) {
      throw Error(ErrorCode::TooFewPoints,
                  "frame-0 clustering produced an empty cluster");
    }
  }
  return register_common(seq, init, std::move(assignment), cfg, seed);
}

ClusterTrack register_sequence(const FrameSequence& seq,
                               const InitialClusters& init,
                               const RegressorConfig& cfg, std::uint64_t seed) {
  if (seq.frames.empty()) {
    throw Error(ErrorCode::EmptySequence, "empty sequence: " + seq.source_id);
  }
  ClusterAssignment assignment =
      kmeans_fixed_centers(seq.frames[0], positions_of(init.poses0));
  return register_common(seq, init, std::move(assignment), cfg, seed);
}

// JSON ----------------------------------------------------------------------

namespace {

json pose_to_json(const Pose& p) {
  return json{{"position", {p.position.x(), p.position.y(), p.position.z()}},
              {"orientation",
               {p.orientation.w, p.orientation.x, p.orientation.y,
                p.orientation.z}}};
}

Pose pose_from_json(const json& j) {
  Pose p;
  const auto& pos = j.at("position");
  const auto& q = j.at("orientation");
  p.position = {pos.at(0).get<double>(), pos.at(1).get<double>(),
                pos.at(2).get<double>()};
  p.orientation = {q.at(0).get<double>(), q.at(1).get<double>(),
                   q.at(2).get<double>(), q.at(3).get<double>()};
  return p;
}

json cloud_to_json(const PointCloud& c) {
  json arr = json::array();
  for (const auto& p : c.pts) arr.push_back({p.x(), p.y(), p.z()});
  return arr;
}

PointCloud cloud_from_json(const json& j) {
  PointCloud c;
  for (const auto& e : j) {
    c.pts.emplace_back(e.at(0).get<double>(), e.at(1).get<double>(),
                       e.at(2).get<double>());
  }
  return c;
}

json track_to_json(const ClusterTrack& t) {
  json j;
  j["source_id"] = t.source_id;
  j["cluster_count"] = t.cluster_count();
  json poses = json::array();
  for (const auto& frame : t.poses) {
    json row = json::array();
    for (const auto& p : frame) row.push_back(pose_to_json(p));
    poses.push_back(std::move(row));
  }
  j["poses"] = std::move(poses);
  json locals = json::array();
  for (const auto& c : t.local_points) locals.push_back(cloud_to_json(c));
  j["local_points"] = std::move(locals);
  json members = json::array();
  for (const auto& m : t.memberships) {
    json jm;
    jm["labels"] = m.labels;
    json centers = json::array();
    for (const auto& c : m.centers) centers.push_back({c.x(), c.y(), c.z()});
    jm["centers"] = std::move(centers);
    members.push_back(std::move(jm));
  }
  j["memberships"] = std::move(members);
  j["step_loss"] = t.step_loss;
  j["anchor_loss"] = t.anchor_loss;
  j["final_loss"] = t.final_loss;
  return j;
}

ClusterTrack track_from_json(const json& j) {
  ClusterTrack t;
  t.source_id = j.at("source_id").get<std::string>();
  for (const auto& frame : j.at("poses")) {
    std::vector<Pose> row;
    for (const auto& p : frame) row.push_back(pose_from_json(p));
    t.poses.push_back(std::move(row));
  }
  for (const auto& c : j.at("local_points")) {
    t.local_points.push_back(cloud_from_json(c));
  }
  for (const auto& m : j.at("memberships")) {
    ClusterAssignment a;
    a.labels = m.at("labels").get<std::vector<int>>();
    for (const auto& c : m.at("centers")) {
      a.centers.emplace_back(c.at(0).get<double>(), c.at(1).get<double>(),
                             c.at(2).get<double>());
    }
    t.memberships.push_back(std::move(a));
  }
  t.step_loss = j.at("step_loss").get<std::vector<std::vector<double>>>();
  t.anchor_loss = j.at("anchor_loss").get<std::vector<std::vector<double>>>();
  t.final_loss = j.at("final_loss").get<std::vector<double>>();

  std::size_t s = t.cluster_count();
  for (const auto& frame : t.poses) {
    if (frame.size() != s) {
      throw Error(ErrorCode::ShapeMismatch, "track: ragged pose table");
    }
  }
  if (t.local_points.size() != s || t.memberships.size() != t.poses.size()) {
    throw Error(ErrorCode::ShapeMismatch, "track: inconsistent sizes");
  }
  return t;
}

}  // namespace

void save_tracks(const std::filesystem::path& path,
                 const std::vector<ClusterTrack>& tracks) {
  json arr = json::array();
  for (const auto& t : tracks) arr.push_back(track_to_json(t));
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << arr.dump(2) << "\n";
}

std::vector<ClusterTrack> load_tracks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  json arr;
  try {
    in >> arr;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  std::vector<ClusterTrack> out;
  try {
    for (const auto& j : arr) out.push_back(track_from_json(j));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (out.empty()) {
    throw Error(ErrorCode::EmptySequence, "track file has no tracks");
  }
  return out;
}

}  // namespace kf
