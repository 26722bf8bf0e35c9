#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "kinemaforge/clustering.hpp"
#include "kinemaforge/error.hpp"
#include "kinemaforge/rng.hpp"
#include "test_support.hpp"

using namespace kf;
using kftest::random_cloud;

namespace {

// Three well-separated gaussian blobs around fixed centers.
PointCloud blob_cloud(std::vector<int>& truth, Rng& rng) {
  const Eigen::Vector3d centers[3] = {
      {0.0, 0.0, 0.0}, {10.0, 0.0, 0.0}, {0.0, 10.0, 0.0}};
  PointCloud cloud;
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < 40; ++i) {
      cloud.pts.push_back(centers[b] + 0.2 * rng.gaussian3());
      truth.push_back(b);
    }
  }
  return cloud;
}

// Fraction of point pairs on which two labelings agree about togetherness;
// 1.0 means identical partitions regardless of label naming.
double pair_agreement(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      ++total;
      if ((a[i] == a[j]) == (b[i] == b[j])) ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("kmeans recovers separated blobs") {
  std::vector<int> truth;
  Rng rng(2024);
  PointCloud cloud = blob_cloud(truth, rng);
  ClusterAssignment a = kmeans_pp(cloud, 3, 7);
  REQUIRE(a.labels.size() == cloud.size());
  REQUIRE(a.centers.size() == 3);
  CHECK(pair_agreement(a.labels, truth) == 1.0);
}

TEST_CASE("kmeans centers are member means") {
  Rng rng(5);
  PointCloud cloud = random_cloud(80, rng);
  ClusterAssignment a = kmeans_pp(cloud, 5, 11);
  auto groups = a.members();
  REQUIRE(groups.size() == 5);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    REQUIRE(!groups[c].empty());
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::size_t i : groups[c]) mean += cloud.pts[i];
    mean /= static_cast<double>(groups[c].size());
    CHECK((mean - a.centers[c]).norm() < 1e-12);
  }
  // Every point sits with its nearest center.
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double own = (cloud.pts[i] - a.centers[a.labels[i]]).squaredNorm();
    for (const auto& c : a.centers) {
      CHECK(own <= (cloud.pts[i] - c).squaredNorm() + 1e-12);
    }
  }
}

TEST_CASE("kmeans determinism and errors") {
  Rng rng(6);
  PointCloud cloud = random_cloud(50, rng);
  ClusterAssignment a = kmeans_pp(cloud, 4, 3);
  ClusterAssignment b = kmeans_pp(cloud, 4, 3);
  CHECK(a.labels == b.labels);
  for (std::size_t c = 0; c < a.centers.size(); ++c) {
    CHECK(kftest::same_xyz(a.centers[c], b.centers[c]));
  }
  ClusterAssignment other = kmeans_pp(cloud, 4, 4);
  (void)other;  // different seed must at least not crash

  CHECK_THROWS_AS(kmeans_pp(cloud, 51, 3), Error);

  // k == n: every point its own cluster.
  PointCloud tiny;
  tiny.pts = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  ClusterAssignment each = kmeans_pp(tiny, 3, 1);
  std::vector<int> sorted = each.labels;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2});
}

TEST_CASE("fixed-center assignment") {
  PointCloud cloud;
  cloud.pts = {{1.0, 0.0, 0.0}, {9.0, 0.0, 0.0}, {11.0, 0.0, 0.0}};
  std::vector<Eigen::Vector3d> centers = {{0.0, 0.0, 0.0}, {10.0, 0.0, 0.0}};
  ClusterAssignment a = kmeans_fixed_centers(cloud, centers);
  CHECK(a.labels == std::vector<int>{0, 1, 1});
  CHECK((a.centers[0] - Eigen::Vector3d(1.0, 0.0, 0.0)).norm() < 1e-15);
  CHECK((a.centers[1] - Eigen::Vector3d(10.0, 0.0, 0.0)).norm() < 1e-15);

  // A center that attracts nothing keeps its input position.
  std::vector<Eigen::Vector3d> far = {{0.0, 0.0, 0.0}, {100.0, 0.0, 0.0}};
  ClusterAssignment b = kmeans_fixed_centers(cloud, far);
  CHECK(b.labels == std::vector<int>{0, 0, 0});
  CHECK(kftest::same_xyz(b.centers[1], {100.0, 0.0, 0.0}));
}

TEST_CASE("silhouette hand oracle") {
  // Two pairs: within-pair distance 1, across-pair distance 4.
  // Every point: a = 1, b = 4, s = (4-1)/4 = 0.75.
  Eigen::MatrixXd dist(4, 4);
  dist << 0, 1, 4, 4,
          1, 0, 4, 4,
          4, 4, 0, 1,
          4, 4, 1, 0;
  std::vector<int> labels = {0, 0, 1, 1};
  CHECK(silhouette_mean(dist, labels) == doctest::Approx(0.75).epsilon(1e-12));

  // Split one pair: the two singletons contribute 0 each.
  // Point 0: a = 1 (with 1), b = min(mean to {2}, mean to {3}) = 4, s = 0.75.
  // Same for point 1; mean = (0.75 + 0.75 + 0 + 0) / 4.
  std::vector<int> split = {0, 0, 1, 2};
  CHECK(silhouette_mean(dist, split) == doctest::Approx(0.375).epsilon(1e-12));

  // Groups cutting across the pairs: {0,2} and {1,3}.
  //   point 0: a = d(0,2) = 4, b = (d(0,1)+d(0,3))/2 = 2.5, s = (2.5-4)/4.
  //   point 2: a = 4, b = (d(2,1)+d(2,3))/2 = 2.5, s = -0.375.
  //   point 1: a = d(1,3) = 4, b = (d(1,0)+d(1,2))/2 = 2.5, s = -0.375.
  //   point 3: a = 4, b = (d(3,0)+d(3,2))/2 = 2.5, s = -0.375.
  std::vector<int> bad = {0, 1, 0, 1};
  CHECK(silhouette_mean(dist, bad) == doctest::Approx(-0.375).epsilon(1e-12));

  CHECK_THROWS_AS(silhouette_mean(dist, std::vector<int>{0, 0, 0, 0}), Error);
  CHECK_THROWS_AS(silhouette_mean(dist, std::vector<int>{0, 0, 0}), Error);
}

TEST_CASE("silhouette prefers the true block count") {
  // Distance matrix with three tight blocks; any split of a block creates
  // singletons or tight-vs-tight neighbours and must score lower.
  const int n = 9;
  Eigen::MatrixXd dist(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) dist(i, j) = 0.0;
      else if (i / 3 == j / 3) dist(i, j) = 0.05 + 0.01 * ((i + j) % 3);
      else dist(i, j) = 1.0 + 0.01 * ((i * j) % 5);
    }
  }
  std::vector<int> three = {0, 0, 0, 1, 1, 1, 2, 2, 2};
  std::vector<int> two = {0, 0, 0, 1, 1, 1, 1, 1, 1};
  std::vector<int> four = {0, 0, 0, 1, 1, 1, 2, 2, 3};
  double s3 = silhouette_mean(dist, three);
  CHECK(s3 > silhouette_mean(dist, two));
  CHECK(s3 > silhouette_mean(dist, four));
}

}  // TEST_SUITE
