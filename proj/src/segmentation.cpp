#include "kinemaforge/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "json.hpp"

#include "kinemaforge/clustering.hpp"
#include "kinemaforge/error.hpp"

using json = nlohmann::ordered_json;

namespace kf {

double default_alpha(double bbox_diagonal) {
  if (bbox_diagonal <= 0.0) {
    throw Error(ErrorCode::DegenerateCloud, "alpha: non-positive scene size");
  }
  return M_PI / bbox_diagonal;
}

Eigen::MatrixXd correlation_matrix(const ClusterTrack& track, double alpha,
                                   bool use_euc, bool use_geo) {
  if (!use_euc && !use_geo) {
    throw Error(ErrorCode::InvalidConfig,
                "correlation: both distance terms disabled");
  }
  const std::size_t s = track.cluster_count();
  const std::size_t T = track.frame_count();
  if (T < 2) {
    throw Error(ErrorCode::DegenerateTrack, "correlation needs >= 2 frames");
  }

  // Per-frame displacements from frame 0.
  std::vector<std::vector<Eigen::Vector3d>> dp(T);
  std::vector<std::vector<Quat>> dq(T);
  for (std::size_t t = 1; t < T; ++t) {
    dp[t].resize(s);
    dq[t].resize(s);
    for (std::size_t c = 0; c < s; ++c) {
      dp[t][c] = track.poses[t][c].position - track.poses[0][c].position;
      dq[t][c] =
          track.poses[t][c].orientation * track.poses[0][c].orientation.conjugate();
    }
  }

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<long>(s),
                                            static_cast<long>(s));
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t j = i + 1; j < s; ++j) {
        double d = 0.0;
        if (use_euc) d += alpha * (dp[t][i] - dp[t][j]).norm();
        if (use_geo) d += quat_geodesic(dq[t][i], dq[t][j]);
        m(static_cast<long>(i), static_cast<long>(j)) += d;
        m(static_cast<long>(j), static_cast<long>(i)) += d;
      }
    }
  }

  double mx = m.maxCoeff();
  if (mx < 1e-12) {
    throw Error(ErrorCode::DegenerateTrack,
                "correlation: no relative motion between clusters");
  }
  return m / mx;
}

Eigen::MatrixXd merge_correlations(const std::vector<Eigen::MatrixXd>& mats) {
  if (mats.empty()) {
    throw Error(ErrorCode::InvalidConfig, "merge_correlations: empty input");
  }
  Eigen::MatrixXd sum = mats[0];
  for (std::size_t i = 1; i < mats.size(); ++i) {
    if (mats[i].rows() != sum.rows() || mats[i].cols() != sum.cols()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "merge_correlations: matrix size mismatch");
    }
    sum += mats[i];
  }
  sum /= static_cast<double>(mats.size());
  double mx = sum.maxCoeff();
  if (mx < 1e-12) {
    throw Error(ErrorCode::DegenerateTrack,
                "merge_correlations: no relative motion");
  }
  return sum / mx;
}

namespace {

// One linkage pass recording every merge; cuts at any k are derived from the
// merge sequence.  Average linkage via Lance-Williams updates.
struct LinkageResult {
  // merges[m] = (a, b): active group a absorbs group b at step m.
  std::vector<std::pair<int, int>> merges;
};

LinkageResult average_linkage(const Eigen::MatrixXd& dist) {
  const int n = static_cast<int>(dist.rows());
  Eigen::MatrixXd d = dist;
  std::vector<int> size(static_cast<std::size_t>(n), 1);
  std::vector<bool> active(static_cast<std::size_t>(n), true);

  LinkageResult out;
  for (int step = 0; step < n - 1; ++step) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        if (d(i, j) < best) {
          best = d(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    out.merges.emplace_back(bi, bj);
    double ni = size[static_cast<std::size_t>(bi)];
    double nj = size[static_cast<std::size_t>(bj)];
    for (int k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == bi || k == bj) continue;
      double v = (ni * d(bi, k) + nj * d(bj, k)) / (ni + nj);
      d(bi, k) = v;
      d(k, bi) = v;
    }
    size[static_cast<std::size_t>(bi)] += size[static_cast<std::size_t>(bj)];
    active[static_cast<std::size_t>(bj)] = false;
  }
  return out;
}

std::vector<int> labels_at_k(const LinkageResult& linkage, int n, int k) {
  // Union-find replay of the first n - k merges.
  std::vector<int> parent(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (int m = 0; m < n - k; ++m) {
    int a = find(linkage.merges[static_cast<std::size_t>(m)].first);
    int b = find(linkage.merges[static_cast<std::size_t>(m)].second);
    // Smaller root wins so group representatives stay stable.
    if (a > b) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
  }
  // Renumber by lowest member index.
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  int next = 0;
  std::vector<int> root_label(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    int r = find(i);
    if (root_label[static_cast<std::size_t>(r)] < 0) {
      root_label[static_cast<std::size_t>(r)] = next++;
    }
    labels[static_cast<std::size_t>(i)] = root_label[static_cast<std::size_t>(r)];
  }
  return labels;
}

}  // namespace

std::vector<int> agglomerative_labels(const Eigen::MatrixXd& dist, int k) {
  const int n = static_cast<int>(dist.rows());
  if (k < 1 || k > n) {
    throw Error(ErrorCode::InvalidConfig, "agglomerative: k out of range");
  }
  return labels_at_k(average_linkage(dist), n, k);
}

PartLabeling group_parts(const Eigen::MatrixXd& corr, int k_min, int k_max) {
  const int s = static_cast<int>(corr.rows());
  int lo = std::max(2, k_min);
  int hi = std::min(k_max, s - 1);
  if (hi < lo) {
    throw Error(ErrorCode::SingleGroup,
                "part-count scan range is empty (clusters: " +
                    std::to_string(s) + ")");
  }
  LinkageResult linkage = average_linkage(corr);

  PartLabeling best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = lo; k <= hi; ++k) {
    std::vector<int> labels = labels_at_k(linkage, s, k);
    double score = silhouette_mean(corr, labels);
    best.curve.emplace_back(k, score);
    if (score > best_score) {
      best_score = score;
      best.labels = std::move(labels);
      best.k = k;
    }
  }
  return best;
}

void save_segmentation_report(const std::filesystem::path& path,
                              const Eigen::MatrixXd& corr,
                              const PartLabeling& labeling, double alpha) {
  json j;
  j["alpha"] = alpha;
  json rows = json::array();
  for (long i = 0; i < corr.rows(); ++i) {
    json row = json::array();
    for (long c = 0; c < corr.cols(); ++c) row.push_back(corr(i, c));
    rows.push_back(std::move(row));
  }
  j["correlation"] = std::move(rows);
  json curve = json::array();
  for (const auto& [k, score] : labeling.curve) {
    curve.push_back(json{{"k", k}, {"silhouette", score}});
  }
  j["silhouette_curve"] = std::move(curve);
  j["chosen_k"] = labeling.k;
  j["labels"] = labeling.labels;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

SegmentationReport load_segmentation_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  json j;
  try {
    in >> j;
    SegmentationReport rep;
    rep.alpha = j.at("alpha").get<double>();
    const auto& rows = j.at("correlation");
    long n = static_cast<long>(rows.size());
    rep.corr.resize(n, n);
    for (long i = 0; i < n; ++i) {
      for (long c = 0; c < n; ++c) {
        rep.corr(i, c) = rows.at(static_cast<std::size_t>(i))
                             .at(static_cast<std::size_t>(c))
                             .get<double>();
      }
    }
    for (const auto& e : j.at("silhouette_curve")) {
      rep.labeling.curve.emplace_back(e.at("k").get<int>(),
                                      e.at("silhouette").get<double>());
    }
    rep.labeling.k = j.at("chosen_k").get<int>();
    rep.labeling.labels = j.at("labels").get<std::vector<int>>();
    return rep;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace kf
