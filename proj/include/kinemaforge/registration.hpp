#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kinemaforge/clustering.hpp"
#include "kinemaforge/pointcloud.hpp"
#include "kinemaforge/regressor.hpp"

namespace kf {

// Result of registering one frame sequence: S clusters tracked through T
// frames.  poses[t][c] maps cluster c's local frame into world space at
// frame t; frame 0 poses are identity rotations positioned at the cluster
// centroids.  local_points[c] holds cluster c's member points of frame 0
// expressed in that local frame; memberships[t] re-associates every frame's
// points with the tracked clusters.
struct ClusterTrack {
  std::string source_id;
  std::vector<std::vector<Pose>> poses;
  std::vector<PointCloud> local_points;
  std::vector<ClusterAssignment> memberships;

  // Optimization diagnostics, one curve per frame transition.
  std::vector<std::vector<double>> step_loss;
  std::vector<std::vector<double>> anchor_loss;
  std::vector<double> final_loss;

  std::size_t frame_count() const { return poses.size(); }
  std::size_t cluster_count() const {
    return poses.empty() ? 0 : poses[0].size();
  }
};

// Frame-0 cluster state shared between sequences of the same scene.
struct InitialClusters {
  std::vector<Pose> poses0;
  std::vector<PointCloud> local_points;
  PoseNormalizer norm;
};

InitialClusters initial_clusters_from_track(const ClusterTrack& track);

// Registers a sequence from scratch: k-means++ partition of frame 0 into s
// clusters, then frame-to-frame optimization (step model on the previous
// frame's clusters, anchor model refining against the frame-0 clusters).
// Throws TooFewPoints / RegistrationFailed / DivergedOptimization.
ClusterTrack register_sequence(const FrameSequence& seq, int s,
                               const RegressorConfig& cfg, std::uint64_t seed);

// Same, but reuses an existing frame-0 cluster decomposition (multi-sequence
// capture of the same scene: every sequence must start near the shared rest
// configuration).  memberships[0] is recomputed against the shared centers.
ClusterTrack register_sequence(const FrameSequence& seq,
                               const InitialClusters& init,
                               const RegressorConfig& cfg, std::uint64_t seed);

// One Chamfer optimization: transforms each local cluster by a pose predicted
// from `init` (residual network, or the raw parameters in direct mode) and
// minimizes the symmetric L1 Chamfer distance to `target`.  Returns the best
// poses seen, the loss curve (entry 0 = loss of `init` itself), and the best
// loss.  Correspondences are recomputed every iteration; each iteration's
// gradient uses that iteration's (frozen) correspondences.
struct OptimizeResult {
  std::vector<Pose> poses;
  std::vector<double> curve;
  double best_loss = 0.0;
};

OptimizeResult optimize_poses(PoseRegressor& net, const std::vector<Pose>& init,
                              const std::vector<PointCloud>& locals,
                              const PointCloud& target,
                              const PoseNormalizer& norm,
                              const RegressorConfig& cfg, double lr);

// Loss of the regressor's current parameters on one Chamfer fit, together
// with the reverse-mode parameter gradient (accumulated into net.grads()).
// Exactly one iteration of optimize_poses without the update step; exposed
// so the gradient can be verified against finite differences.
double registration_loss_grad(PoseRegressor& net, const std::vector<Pose>& init,
                              const std::vector<PointCloud>& locals,
                              const PointCloud& target,
                              const PoseNormalizer& norm);

// track.json holds an array of serialized tracks, one per sequence.
void save_tracks(const std::filesystem::path& path,
                 const std::vector<ClusterTrack>& tracks);
std::vector<ClusterTrack> load_tracks(const std::filesystem::path& path);

}  // namespace kf
