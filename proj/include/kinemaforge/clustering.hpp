#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "kinemaforge/pointcloud.hpp"

namespace kf {

// A hard partition of a cloud into k clusters.  labels[i] in [0, k);
// centers.size() == k.  Clusters may be empty only for the fixed-center
// variant (where an empty cluster keeps its input center).
struct ClusterAssignment {
  std::vector<int> labels;
  std::vector<Eigen::Vector3d> centers;

  std::size_t cluster_count() const { return centers.size(); }
  std::vector<std::vector<std::size_t>> members() const;
};

// k-means with k-means++ seeding (D^2 weighting) and Lloyd iterations
// (assignment ties toward the lowest center index; empty clusters reseeded
// to the point farthest from its assigned center).  Fully deterministic for
// a given seed.  Throws TooFewPoints when cloud.size() < k.
ClusterAssignment kmeans_pp(const PointCloud& cloud, int k, std::uint64_t seed,
                            int max_iters = 100);

// Single assignment pass against the given centers followed by one center
// update (mean of members; an empty cluster keeps its input center).  Used to
// re-associate points with tracked clusters frame to frame.
ClusterAssignment kmeans_fixed_centers(const PointCloud& cloud,
                                       const std::vector<Eigen::Vector3d>& centers);

// Mean silhouette score for a labeling under a precomputed distance matrix.
// a(i) = mean within-cluster distance (0 for singletons), b(i) = smallest
// mean distance to another cluster, s(i) = (b - a) / max(a, b) with s(i) = 0
// when max(a, b) = 0.  Requires at least two distinct labels.
double silhouette_mean(const Eigen::MatrixXd& dist,
                       const std::vector<int>& labels);

}  // namespace kf
