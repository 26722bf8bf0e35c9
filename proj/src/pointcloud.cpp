#include "kinemaforge/pointcloud.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "kinemaforge/error.hpp"
#include "kinemaforge/parallel.hpp"

namespace fs = std::filesystem;

namespace kf {

Bbox bbox(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "bbox of empty cloud");
  Bbox b;
  b.min = b.max = cloud.pts[0];
  for (const auto& p : cloud.pts) {
    b.min = b.min.cwiseMin(p);
    b.max = b.max.cwiseMax(p);
  }
  return b;
}

Eigen::Vector3d centroid(const PointCloud& cloud) {
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "centroid of empty cloud");
  }
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.pts) sum += p;
  return sum / static_cast<double>(cloud.size());
}

PointCloud transform_cloud(const PointCloud& cloud, const Transform3D& T) {
  PointCloud out;
  out.pts.reserve(cloud.size());
  for (const auto& p : cloud.pts) out.pts.push_back(T.apply(p));
  return out;
}

PointCloud downsample_random(const PointCloud& cloud, std::size_t n, Rng& rng) {
  if (n >= cloud.size()) return cloud;
  // Partial Fisher-Yates over an index array, then restore ascending order so
  // the subsample preserves the input ordering.
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(
                            rng.uniform_index(cloud.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  PointCloud out;
  out.pts.reserve(n);
  for (std::size_t i : idx) out.pts.push_back(cloud.pts[i]);
  return out;
}

// KdTree --------------------------------------------------------------------

void KdTree::build(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "kd-tree of empty cloud");
  points_ = &cloud.pts;
  order_.resize(cloud.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.clear();
  nodes_.reserve(2 * cloud.size() / 3 + 8);
  nodes_.push_back(Node{});
  root_ = 0;
  build_range(0, cloud.size(), 0);
}

void KdTree::build_range(std::size_t lo, std::size_t hi, int node_index) {
  const auto& pts = *points_;
  Eigen::Vector3d mn = pts[order_[lo]], mx = pts[order_[lo]];
  for (std::size_t i = lo + 1; i < hi; ++i) {
    mn = mn.cwiseMin(pts[order_[i]]);
    mx = mx.cwiseMax(pts[order_[i]]);
  }
  Eigen::Vector3d ext = mx - mn;
  int axis = 0;
  if (ext.y() > ext.x()) axis = 1;
  if (ext.z() > ext[axis]) axis = 2;

  std::size_t mid = lo + (hi - lo) / 2;
  auto cmp = [&](std::size_t a, std::size_t b) {
    double pa = pts[a][axis], pb = pts[b][axis];
    if (pa != pb) return pa < pb;
    return a < b;  // deterministic order for equal coordinates
  };
  std::nth_element(order_.begin() + static_cast<long>(lo),
                   order_.begin() + static_cast<long>(mid),
                   order_.begin() + static_cast<long>(hi), cmp);

  Node& node = nodes_[node_index];
  node.axis = axis;
  node.lo = lo;
  node.hi = hi;
  node.mid = mid;
  node.left = node.right = -1;

  if (mid > lo) {
    int child = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{});
    nodes_[node_index].left = child;
    build_range(lo, mid, child);
  }
  if (mid + 1 < hi) {
    int child = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{});
    nodes_[node_index].right = child;
    build_range(mid + 1, hi, child);
  }
}

namespace {
inline double dist_l1(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::abs(a.x() - b.x()) + std::abs(a.y() - b.y()) +
         std::abs(a.z() - b.z());
}
}  // namespace

template <int Metric>
void KdTree::search(int node_index, const Eigen::Vector3d& q,
                    NnResult& best) const {
  const Node& node = nodes_[node_index];
  const auto& pts = *points_;
  std::size_t pi = order_[node.mid];
  const Eigen::Vector3d& p = pts[pi];

  double d;
  if constexpr (Metric == 1) {
    d = dist_l1(q, p);
  } else {
    d = (q - p).squaredNorm();
  }
  if (d < best.distance || (d == best.distance && pi < best.index)) {
    best.distance = d;
    best.index = pi;
  }

  double delta = q[node.axis] - p[node.axis];
  int near = delta < 0.0 ? node.left : node.right;
  int far = delta < 0.0 ? node.right : node.left;
  if (near >= 0) search<Metric>(near, q, best);
  double gap;
  if constexpr (Metric == 1) {
    gap = std::abs(delta);
  } else {
    gap = delta * delta;
  }
  // <= keeps the search exact when an equal-distance point (and hence a
  // lower-index tie candidate) could sit on the far side.
  if (far >= 0 && gap <= best.distance) search<Metric>(far, q, best);
}

NnResult KdTree::nearest_l1(const Eigen::Vector3d& q) const {
  NnResult best;
  best.index = points_->size();
  best.distance = std::numeric_limits<double>::infinity();
  search<1>(root_, q, best);
  return best;
}

NnResult KdTree::nearest_l2(const Eigen::Vector3d& q) const {
  NnResult best;
  best.index = points_->size();
  best.distance = std::numeric_limits<double>::infinity();
  search<2>(root_, q, best);
  best.distance = std::sqrt(best.distance);
  return best;
}

// Chamfer -------------------------------------------------------------------

double chamfer_l1(const PointCloud& a, const PointCloud& b, const KdTree& tree_a,
                  const KdTree& tree_b) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::EmptyCloud, "chamfer with empty cloud");
  }
  std::vector<double> da(a.size()), db(b.size());
  parallel_for(a.size(), [&](std::size_t i) {
    da[i] = dist_l1(a.pts[i], b.pts[tree_b.nearest_l1(a.pts[i]).index]);
  });
  parallel_for(b.size(), [&](std::size_t i) {
    db[i] = dist_l1(b.pts[i], a.pts[tree_a.nearest_l1(b.pts[i]).index]);
  });
  double sum = 0.0;
  for (double d : da) sum += d;
  for (double d : db) sum += d;
  return sum / static_cast<double>(a.size() + b.size());
}

double chamfer_l1(const PointCloud& a, const PointCloud& b) {
  KdTree ta(a), tb(b);
  return chamfer_l1(a, b, ta, tb);
}

// I/O -----------------------------------------------------------------------

namespace {

bool parse_three_doubles(const std::string& line, Eigen::Vector3d& out) {
  const char* p = line.c_str();
  const char* end = p + line.size();
  for (int k = 0; k < 3; ++k) {
    while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
    if (p >= end) return false;
    double v;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc()) return false;
    if (!std::isfinite(v)) return false;
    out[k] = v;
    p = next;
  }
  while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
  return p == end;
}

}  // namespace

PointCloud load_frame(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open frame file " + path.string());
  }
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Strip trailing CR from files written on other platforms.
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    Eigen::Vector3d p;
    if (!parse_three_doubles(line, p)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" +
                                             std::to_string(line_no) +
                                             ": expected three finite numbers");
    }
    cloud.pts.push_back(p);
  }
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "frame file has no points: " + path.string());
  }
  return cloud;
}

FrameSequence load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  }
  std::vector<long> indices;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name.size() < 10 || name.rfind("frame_", 0) != 0) continue;
    if (entry.path().extension() != ".xyz") continue;
    std::string digits = name.substr(6, name.size() - 6 - 4);
    if (digits.empty() ||
        !std::all_of(digits.begin(), digits.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      continue;
    }
    indices.push_back(std::stol(digits));
  }
  if (indices.empty()) {
    throw Error(ErrorCode::EmptySequence, "no frame_*.xyz files in " + dir.string());
  }
  std::sort(indices.begin(), indices.end());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] != static_cast<long>(i)) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "frame_%04ld.xyz", static_cast<long>(i));
      throw Error(ErrorCode::MissingFrame,
                  dir.string() + ": expected " + buf + " (frame indices must be "
                  "contiguous from 0)");
    }
  }

  FrameSequence seq;
  seq.source_id = dir.string();
  seq.frames.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04ld.xyz", static_cast<long>(i));
    seq.frames[i] = load_frame(dir / buf);
  }
  return seq;
}

std::vector<FrameSequence> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  }
  fs::path base = path.parent_path();
  std::vector<FrameSequence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    std::size_t last = line.find_last_not_of(" \t");
    fs::path dir(line.substr(first, last - first + 1));
    if (dir.is_relative()) dir = base / dir;
    out.push_back(load_sequence(dir));
  }
  if (out.empty()) {
    throw Error(ErrorCode::EmptySequence,
                "manifest lists no sequences: " + path.string());
  }
  return out;
}

void write_frame(const fs::path& path, const PointCloud& cloud) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& p : cloud.pts) {
    std::fprintf(f, "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
  }
  std::fclose(f);
}

void write_sequence(const fs::path& dir, const std::vector<PointCloud>& frames) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04zu.xyz", i);
    write_frame(dir / buf, frames[i]);
  }
}

}  // namespace kf
