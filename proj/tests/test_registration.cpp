#include <cmath>
#include <vector>

#include "doctest.h"
#include "kinemaforge/error.hpp"
#include "kinemaforge/pointcloud.hpp"
#include "kinemaforge/registration.hpp"
#include "kinemaforge/rng.hpp"
#include "test_support.hpp"

using namespace kf;
using kftest::random_cloud;

namespace {

RegressorConfig quick_config() {
  RegressorConfig cfg;
  cfg.hidden_width = 32;
  cfg.encoder_layers = 2;
  cfg.head_width = 16;
  cfg.pe_bands = 4;
  cfg.max_iters = 250;
  cfg.patience = 40;
  return cfg;
}

// Two rigid bodies: a cube of points around the origin and another around
// (0.6, 0, 0); the second one slides along +y a bit every frame.
FrameSequence two_body_sequence(int frames, Rng& rng) {
  PointCloud body_a = random_cloud(120, rng, 0.08);
  PointCloud body_b = random_cloud(120, rng, 0.08);
  for (auto& p : body_b.pts) p += Eigen::Vector3d(0.6, 0.0, 0.0);

  FrameSequence seq;
  seq.source_id = "synthetic";
  for (int t = 0; t < frames; ++t) {
    PointCloud frame = body_a;
    Eigen::Vector3d shift(0.0, 0.04 * t, 0.0);
    for (const auto& p : body_b.pts) frame.pts.push_back(p + shift);
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace

TEST_SUITE("registration") {

TEST_CASE("loss gradient matches finite differences") {
  Rng rng(31);
  RegressorConfig cfg = quick_config();
  PoseRegressor net(cfg, 5);
  for (double& w : net.params()) w += 0.02 * rng.gaussian();

  std::vector<PointCloud> locals;
  std::vector<Pose> init;
  PointCloud target;
  for (int c = 0; c < 2; ++c) {
    locals.push_back(random_cloud(30, rng, 0.05));
    Pose p;
    p.position = Eigen::Vector3d(0.3 * c, 0.0, 0.0);
    init.push_back(p);
    for (const auto& q : locals.back().pts) {
      target.pts.push_back(q + p.position + 0.01 * rng.gaussian3());
    }
  }
  PoseNormalizer norm;
  norm.scale = 1.0;

  double loss = registration_loss_grad(net, init, locals, target, norm);
  CHECK(loss > 0.0);
  std::vector<double> grads = net.grads();

  const double h = 1e-5;
  Rng pick(37);
  int checked = 0;
  for (int trial = 0; trial < 12 && checked < 8; ++trial) {
    std::size_t idx = pick.uniform_index(net.param_count());
    double saved = net.params()[idx];
    net.params()[idx] = saved + h;
    double up = registration_loss_grad(net, init, locals, target, norm);
    net.params()[idx] = saved - h;
    double down = registration_loss_grad(net, init, locals, target, norm);
    net.params()[idx] = saved;
    double fd = (up - down) / (2.0 * h);
    if (std::abs(fd) < 1e-8 && std::abs(grads[idx]) < 1e-8) continue;
    CHECK(grads[idx] == doctest::Approx(fd).epsilon(2e-3));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("direct optimization recovers a translation") {
  Rng rng(41);
  std::vector<PointCloud> locals = {random_cloud(60, rng, 0.05)};
  std::vector<Pose> init = {Pose{}};
  Eigen::Vector3d shift(0.05, -0.03, 0.02);
  PointCloud target;
  for (const auto& p : locals[0].pts) target.pts.push_back(p + shift);

  RegressorConfig cfg = quick_config();
  cfg.direct = true;
  cfg.max_iters = 400;
  cfg.patience = 80;
  PoseRegressor net(cfg, 1);
  PoseNormalizer norm;

  OptimizeResult res = optimize_poses(net, init, locals, target, norm, cfg, 2e-3);
  REQUIRE(res.poses.size() == 1);
  CHECK(res.best_loss < 0.2 * res.curve.front());
  CHECK((res.poses[0].position - shift).norm() < 0.01);
}

TEST_CASE("optimizer reports the initial loss first") {
  Rng rng(43);
  std::vector<PointCloud> locals = {random_cloud(40, rng, 0.05)};
  std::vector<Pose> init = {Pose{}};
  PointCloud target;
  for (const auto& p : locals[0].pts) {
    target.pts.push_back(p + Eigen::Vector3d(0.02, 0.0, 0.0));
  }
  RegressorConfig cfg = quick_config();
  cfg.max_iters = 5;
  cfg.patience = 5;
  PoseRegressor net(cfg, 2);
  PoseNormalizer norm;
  OptimizeResult res = optimize_poses(net, init, locals, target, norm, cfg, 1e-4);

  // curve[0] must equal the Chamfer distance of the un-optimized placement.
  PointCloud placed = locals[0];
  CHECK(res.curve.front() ==
        doctest::Approx(chamfer_l1(placed, target)).epsilon(1e-12));
  CHECK(res.best_loss <= res.curve.front());
}

TEST_CASE("optimizer input validation") {
  RegressorConfig cfg = quick_config();
  PoseRegressor net(cfg, 1);
  PoseNormalizer norm;
  PointCloud target;
  target.pts = {{0, 0, 0}};
  CHECK_THROWS_AS(
      optimize_poses(net, {}, {}, target, norm, cfg, 1e-4), Error);
  std::vector<Pose> init = {Pose{}};
  std::vector<PointCloud> locals = {PointCloud{}, PointCloud{}};
  CHECK_THROWS_AS(
      optimize_poses(net, init, locals, target, norm, cfg, 1e-4), Error);
  std::vector<PointCloud> one_local = {target};
  CHECK_THROWS_AS(
      optimize_poses(net, init, one_local, PointCloud{}, norm, cfg, 1e-4),
      Error);
}

TEST_CASE("sequence registration tracks a sliding body") {
  Rng rng(47);
  FrameSequence seq = two_body_sequence(4, rng);
  RegressorConfig cfg = quick_config();
  ClusterTrack track = register_sequence(seq, 2, cfg, 11);

  CHECK(track.source_id == "synthetic");
  CHECK(track.frame_count() == 4);
  CHECK(track.cluster_count() == 2);
  REQUIRE(track.local_points.size() == 2);
  REQUIRE(track.memberships.size() == 4);
  CHECK(track.step_loss.size() == 3);
  CHECK(track.final_loss.size() == 3);  // one per frame transition

  // Frame-0 poses are identity rotations at the cluster centroids.
  for (const auto& pose : track.poses[0]) {
    CHECK(quat_geodesic(pose.orientation, Quat::identity()) < 1e-12);
  }

  // One cluster stays put, the other moves by 0.04 per frame along y.
  for (int c = 0; c < 2; ++c) {
    double moved = (track.poses[3][c].position - track.poses[0][c].position).norm();
    bool is_static = track.poses[0][c].position.x() < 0.3;
    if (is_static) {
      CHECK(moved < 0.02);
    } else {
      CHECK(moved == doctest::Approx(0.12).epsilon(0.25));
    }
  }

  // Memberships at every frame form a partition of that frame's points.
  for (int t = 0; t < 4; ++t) {
    CHECK(track.memberships[t].labels.size() == seq.frames[t].size());
    for (int l : track.memberships[t].labels) {
      CHECK(l >= 0);
      CHECK(l < 2);
    }
  }
}

TEST_CASE("registration is deterministic") {
  Rng rng(53);
  FrameSequence seq = two_body_sequence(3, rng);
  RegressorConfig cfg = quick_config();
  ClusterTrack a = register_sequence(seq, 2, cfg, 99);
  ClusterTrack b = register_sequence(seq, 2, cfg, 99);
  REQUIRE(a.poses.size() == b.poses.size());
  for (std::size_t t = 0; t < a.poses.size(); ++t) {
    for (std::size_t c = 0; c < a.poses[t].size(); ++c) {
      CHECK(kftest::same_xyz(a.poses[t][c].position, b.poses[t][c].position));
      CHECK(a.poses[t][c].orientation.w == b.poses[t][c].orientation.w);
      CHECK(a.poses[t][c].orientation.x == b.poses[t][c].orientation.x);
    }
  }
}

TEST_CASE("shared initial clusters align two sequences") {
  Rng rng(59);
  FrameSequence seq_a = two_body_sequence(3, rng);
  // Same frame 0, different per-frame motion realization.
  FrameSequence seq_b;
  seq_b.source_id = "second";
  seq_b.frames.push_back(seq_a.frames[0]);
  PointCloud last = seq_a.frames[0];
  for (std::size_t i = 120; i < last.pts.size(); ++i) {
    last.pts[i] += Eigen::Vector3d(0.0, 0.0, 0.05);
  }
  seq_b.frames.push_back(last);

  RegressorConfig cfg = quick_config();
  ClusterTrack track_a = register_sequence(seq_a, 2, cfg, 7);
  InitialClusters init = initial_clusters_from_track(track_a);
  ClusterTrack track_b = register_sequence(seq_b, init, cfg, 8);

  REQUIRE(track_b.cluster_count() == 2);
  // The shared decomposition carries over exactly.
  for (int c = 0; c < 2; ++c) {
    CHECK(kftest::same_xyz(track_b.poses[0][c].position, track_a.poses[0][c].position));
    REQUIRE(track_b.local_points[c].size() == track_a.local_points[c].size());
    for (std::size_t i = 0; i < track_b.local_points[c].size(); ++i) {
      CHECK(kftest::same_xyz(track_b.local_points[c].pts[i], track_a.local_points[c].pts[i]));
    }
  }
}

TEST_CASE("registration error paths") {
  Rng rng(61);
  FrameSequence seq = two_body_sequence(2, rng);
  RegressorConfig cfg = quick_config();
  CHECK_THROWS_AS(register_sequence(seq, 100000, cfg, 1), Error);
}

TEST_CASE("track serialization round trip") {
  kftest::TempDir tmp("tracks");
  Rng rng(67);
  FrameSequence seq = two_body_sequence(3, rng);
  RegressorConfig cfg = quick_config();
  std::vector<ClusterTrack> tracks = {register_sequence(seq, 2, cfg, 3)};
  save_tracks(tmp.path / "track.json", tracks);
  std::vector<ClusterTrack> back = load_tracks(tmp.path / "track.json");
  REQUIRE(back.size() == 1);
  CHECK(back[0].source_id == tracks[0].source_id);
  REQUIRE(back[0].poses.size() == tracks[0].poses.size());
  for (std::size_t t = 0; t < tracks[0].poses.size(); ++t) {
    for (std::size_t c = 0; c < tracks[0].poses[t].size(); ++c) {
      CHECK(kftest::same_xyz(back[0].poses[t][c].position, tracks[0].poses[t][c].position));
    }
  }
  CHECK(back[0].memberships.size() == tracks[0].memberships.size());
  CHECK(back[0].step_loss == tracks[0].step_loss);
}

}  // TEST_SUITE
