#include "kinemaforge/clustering.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "kinemaforge/error.hpp"
#include "kinemaforge/rng.hpp"

namespace kf {

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(centers.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return out;
}

namespace {

// Assignment pass shared by both k-means variants: nearest center in L2,
// ties toward the lowest center index.
std::vector<int> assign_labels(const PointCloud& cloud,
                               const std::vector<Eigen::Vector3d>& centers) {
  std::vector<int> labels(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      double d = (cloud.pts[i] - centers[c]).squaredNorm();
      if (d < best) {
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    labels[i] = best_c;
  }
  return labels;
}

}  // namespace

ClusterAssignment kmeans_pp(const PointCloud& cloud, int k, std::uint64_t seed,
                            int max_iters) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "kmeans: k must be >= 1");
  if (cloud.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::TooFewPoints,
                "kmeans: " + std::to_string(cloud.size()) + " points < k = " +
                    std::to_string(k));
  }
  Rng rng(seed);
  const std::size_t n = cloud.size();

  // k-means++ seeding.
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(cloud.pts[rng.uniform_index(n)]);
  std::vector<double> d2(n);
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) {
        best = std::min(best, (cloud.pts[i] - c).squaredNorm());
      }
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      // All remaining points coincide with chosen centers; this only happens
      // with heavily duplicated inputs.  Fall back to the lowest index whose
      // point is not already a center.
      bool found = false;
      for (std::size_t i = 0; i < n && !found; ++i) {
        bool used = false;
        for (const auto& c : centers) {
          if ((cloud.pts[i] - c).squaredNorm() == 0.0) {
            used = true;
            break;
          }
        }
        if (!used) {
          pick = i;
          found = true;
        }
      }
      if (!found) {
        throw Error(ErrorCode::TooFewPoints,
                    "kmeans: fewer distinct points than clusters");
      }
    } else {
      double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > u) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(cloud.pts[pick]);
  }

  // Lloyd iterations.
  std::vector<int> labels;
  std::vector<int> prev_labels;
  for (int iter = 0; iter < max_iters; ++iter) {
    labels = assign_labels(cloud, centers);

    std::vector<Eigen::Vector3d> sums(centers.size(), Eigen::Vector3d::Zero());
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[static_cast<std::size_t>(labels[i])] += cloud.pts[i];
      counts[static_cast<std::size_t>(labels[i])]++;
    }

    bool reseeded = false;
    std::set<std::size_t> taken;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] > 0) {
        centers[c] = sums[c] / static_cast<double>(counts[c]);
        continue;
      }
      // Reseed an empty cluster at the point farthest from its assigned
      // center (lowest index on ties, skipping points already taken).
      double far_d = -1.0;
      std::size_t far_i = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken.count(i)) continue;
        double d =
            (cloud.pts[i] - centers[static_cast<std::size_t>(labels[i])])
                .squaredNorm();
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      taken.insert(far_i);
      centers[c] = cloud.pts[far_i];
      reseeded = true;
    }

    if (!reseeded && iter > 0 && labels == prev_labels) break;
    prev_labels = labels;
  }

  // Final assignment so labels stay consistent with the returned centers
  // (centers were just recomputed as member means of this labeling).
  ClusterAssignment out;
  out.labels = std::move(labels);
  out.centers = std::move(centers);
  return out;
}

ClusterAssignment kmeans_fixed_centers(
    const PointCloud& cloud, const std::vector<Eigen::Vector3d>& centers) {
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "fixed-center kmeans on empty cloud");
  }
  if (centers.empty()) {
    throw Error(ErrorCode::InvalidConfig, "fixed-center kmeans: no centers");
  }
  ClusterAssignment out;
  out.labels = assign_labels(cloud, centers);
  out.centers = centers;
  std::vector<Eigen::Vector3d> sums(centers.size(), Eigen::Vector3d::Zero());
  std::vector<std::size_t> counts(centers.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    sums[static_cast<std::size_t>(out.labels[i])] += cloud.pts[i];
    counts[static_cast<std::size_t>(out.labels[i])]++;
  }
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (counts[c] > 0) out.centers[c] = sums[c] / static_cast<double>(counts[c]);
  }
  return out;
}

double silhouette_mean(const Eigen::MatrixXd& dist,
                       const std::vector<int>& labels) {
  const std::size_t n = labels.size();
  if (dist.rows() != static_cast<long>(n) || dist.cols() != static_cast<long>(n)) {
    throw Error(ErrorCode::ShapeMismatch, "silhouette: matrix/labels mismatch");
  }
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (int l : labels) counts[static_cast<std::size_t>(l)]++;
  int nonempty = 0;
  for (auto c : counts) nonempty += c > 0 ? 1 : 0;
  if (nonempty < 2) {
    throw Error(ErrorCode::SingleGroup, "silhouette needs >= 2 clusters");
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    int li = labels[i];
    // Mean distance to each cluster.
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[static_cast<std::size_t>(labels[j])] += dist(static_cast<long>(i),
                                                       static_cast<long>(j));
    }
    std::size_t own = counts[static_cast<std::size_t>(li)];
    if (own <= 1) continue;  // singleton: s(i) = 0 by convention
    double a = sum[static_cast<std::size_t>(li)] / static_cast<double>(own - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == li || counts[static_cast<std::size_t>(c)] == 0) continue;
      b = std::min(b, sum[static_cast<std::size_t>(c)] /
                          static_cast<double>(counts[static_cast<std::size_t>(c)]));
    }
    double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

}  // namespace kf
