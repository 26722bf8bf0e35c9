#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinemaforge/geometry.hpp"
#include "kinemaforge/rng.hpp"

namespace kf {

struct PointCloud {
  std::vector<Eigen::Vector3d> pts;

  std::size_t size() const { return pts.size(); }
  bool empty() const { return pts.empty(); }
};

// An ordered set of frames captured from one motion sequence; source_id is
// the directory the frames were loaded from (kept so downstream stages can
// reload the raw data when resuming from intermediate artifacts).
struct FrameSequence {
  std::vector<PointCloud> frames;
  std::string source_id;
};

struct Bbox {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();

  Eigen::Vector3d center() const { return 0.5 * (min + max); }
  double diagonal() const { return (max - min).norm(); }
};

// Throws EmptyCloud on an empty input.
Bbox bbox(const PointCloud& cloud);
Eigen::Vector3d centroid(const PointCloud& cloud);

PointCloud transform_cloud(const PointCloud& cloud, const Transform3D& T);

// Uniform random subsample without replacement; keeps the original point
// order.  n >= cloud size returns a copy.
PointCloud downsample_random(const PointCloud& cloud, std::size_t n, Rng& rng);

struct NnResult {
  std::size_t index = 0;
  double distance = 0.0;
};

// Exact nearest-neighbour search.  Ties are broken toward the lowest point
// index, for both metrics, so queries are fully deterministic.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(const PointCloud& cloud) { build(cloud); }

  // Rebuilds in place; reuses buffers so per-iteration rebuilds in the
  // optimizer do not allocate.  The referenced cloud must outlive queries.
  void build(const PointCloud& cloud);

  NnResult nearest_l1(const Eigen::Vector3d& q) const;
  NnResult nearest_l2(const Eigen::Vector3d& q) const;

  std::size_t size() const { return order_.size(); }

 private:
  struct Node {
    int axis = 0;
    std::size_t lo = 0, hi = 0, mid = 0;  // range [lo, hi) in order_, split at mid
    int left = -1, right = -1;
  };

  void build_range(std::size_t lo, std::size_t hi, int node_index);
  template <int Metric>
  void search(int node_index, const Eigen::Vector3d& q, NnResult& best) const;

  const std::vector<Eigen::Vector3d>* points_ = nullptr;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Symmetric L1 Chamfer distance: sum of L1 distances to the nearest
// neighbour in the other cloud, over both directions, divided by the total
// number of points (|a| + |b|).  Throws EmptyCloud when either side is empty.
double chamfer_l1(const PointCloud& a, const PointCloud& b);
double chamfer_l1(const PointCloud& a, const PointCloud& b, const KdTree& tree_a,
                  const KdTree& tree_b);

// File I/O ------------------------------------------------------------------
//
// Frame files are ASCII: one "x y z" triple per line, blank lines and lines
// starting with '#' ignored.  A sequence directory contains frame_0000.xyz,
// frame_0001.xyz, ... with no gaps.  A manifest file lists one sequence
// directory per line (relative paths resolved against the manifest's parent).

PointCloud load_frame(const std::filesystem::path& path);
FrameSequence load_sequence(const std::filesystem::path& dir);
std::vector<FrameSequence> load_manifest(const std::filesystem::path& path);

void write_frame(const std::filesystem::path& path, const PointCloud& cloud);
void write_sequence(const std::filesystem::path& dir,
                    const std::vector<PointCloud>& frames);

}  // namespace kf
