#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "kinemaforge/registration.hpp"

namespace kf {

// Pairwise motion-correlation distances between tracked clusters.  For each
// frame t > 0, cluster i's displacement from frame 0 is (p_i(t) - p_i(0),
// q_i(t) q_i(0)^-1); the per-frame distance between clusters i and j combines
// the Euclidean gap between their translation displacements (weighted by
// alpha) with the geodesic angle between their rotation displacements.
// Distances are accumulated over frames and normalized by the maximum entry,
// so values live in [0, 1] and co-moving clusters score near 0.  The matrix
// is invariant under a global rigid transform applied to every frame.
//
// use_euc / use_geo switch the two terms on or off (at least one must stay
// on); the normalization always runs on the accumulated sum.  Throws
// DegenerateTrack when no cluster pair shows any relative motion.
Eigen::MatrixXd correlation_matrix(const ClusterTrack& track, double alpha,
                                   bool use_euc = true, bool use_geo = true);

// Recommended weighting between meters and radians: pi / scene diameter.
double default_alpha(double bbox_diagonal);

// Averages per-sequence correlation matrices and re-normalizes by the max.
Eigen::MatrixXd merge_correlations(const std::vector<Eigen::MatrixXd>& mats);

// Average-linkage agglomerative clustering cut at k groups.  Merge ties break
// lexicographically, and group labels are renumbered by each group's lowest
// member index, so results are deterministic.
std::vector<int> agglomerative_labels(const Eigen::MatrixXd& dist, int k);

struct PartLabeling {
  std::vector<int> labels;                      // cluster -> part id
  int k = 0;                                    // chosen part count
  std::vector<std::pair<int, double>> curve;    // (k, mean silhouette)
};

// Scans k in [k_min, min(k_max, S - 1)], scores each cut with the mean
// silhouette under the correlation distances, and keeps the best (smallest k
// on ties).  Throws SingleGroup when the scan range is empty.
PartLabeling group_parts(const Eigen::MatrixXd& corr, int k_min, int k_max);

void save_segmentation_report(const std::filesystem::path& path,
                              const Eigen::MatrixXd& corr,
                              const PartLabeling& labeling, double alpha);
struct SegmentationReport {
  Eigen::MatrixXd corr;
  PartLabeling labeling;
  double alpha = 0.0;
};
SegmentationReport load_segmentation_report(const std::filesystem::path& path);

}  // namespace kf
