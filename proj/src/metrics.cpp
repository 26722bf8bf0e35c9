#include "kinemaforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "kinemaforge/error.hpp"

namespace kf {

using json = nlohmann::ordered_json;

CdResult metric_cd(const ClusterTrack& track, const FrameSequence& seq) {
  if (track.frame_count() != seq.frames.size()) {
    throw Error(ErrorCode::ShapeMismatch, "track frames != sequence frames");
  }
  if (seq.frames.size() < 2) {
    throw Error(ErrorCode::EmptySequence, "need at least two frames");
  }
  CdResult result;
  for (std::size_t t = 1; t < seq.frames.size(); ++t) {
    PointCloud placed;
    for (std::size_t c = 0; c < track.local_points.size(); ++c) {
      Transform3D world = pose_to_transform(track.poses[t][c]);
      for (const auto& p : track.local_points[c].pts) {
        placed.pts.push_back(world.apply(p));
      }
    }
    result.per_frame_mm.push_back(1000.0 * chamfer_l1(placed, seq.frames[t]));
  }
  result.mean_mm =
      std::accumulate(result.per_frame_mm.begin(), result.per_frame_mm.end(), 0.0) /
      static_cast<double>(result.per_frame_mm.size());
  return result;
}

// Tree edit distance -------------------------------------------------------

TreeShape tree_from_parents(const std::vector<int>& parents) {
  TreeShape shape;
  shape.children.resize(parents.size());
  shape.root = -1;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    int p = parents[i];
    if (p < 0) {
      if (shape.root >= 0) {
        throw Error(ErrorCode::InvalidConfig, "two roots in parent vector");
      }
      shape.root = static_cast<int>(i);
    } else if (p >= static_cast<int>(parents.size())) {
      throw Error(ErrorCode::InvalidConfig, "parent index out of range");
    } else {
      shape.children[static_cast<std::size_t>(p)].push_back(static_cast<int>(i));
    }
  }
  if (shape.root < 0) {
    throw Error(ErrorCode::InvalidConfig, "parent vector has no root");
  }
  return shape;
}

TreeShape tree_shape(const KinematicTree& tree) {
  std::vector<int> parents;
  parents.reserve(tree.links.size());
  for (const auto& link : tree.links) parents.push_back(link.parent);
  return tree_from_parents(parents);
}

TreeShape tree_shape(const UrdfModel& model) {
  std::vector<int> parents(model.links.size(), -1);
  for (const auto& j : model.joints) {
    int c = model.link_index(j.child);
    int p = model.link_index(j.parent);
    if (c < 0 || p < 0) {
      throw Error(ErrorCode::TreeJointMismatch, "joint references unknown link");
    }
    parents[static_cast<std::size_t>(c)] = p;
  }
  (void)model.root_link();  // validates tree structure
  return tree_from_parents(parents);
}

namespace {

struct Canonicalizer {
  const TreeShape& tree;
  std::vector<int> subtree_size;
  std::vector<std::string> canon;

  explicit Canonicalizer(const TreeShape& t)
      : tree(t), subtree_size(t.size(), 0), canon(t.size()) {}

  void run(int v, TreeShape& out) {
    auto vi = static_cast<std::size_t>(v);
    subtree_size[vi] = 1;
    for (int c : tree.children[vi]) {
      run(c, out);
      subtree_size[vi] += subtree_size[static_cast<std::size_t>(c)];
    }
    std::vector<int> order = tree.children[vi];
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      auto ai = static_cast<std::size_t>(a), bi = static_cast<std::size_t>(b);
      if (subtree_size[ai] != subtree_size[bi]) {
        return subtree_size[ai] < subtree_size[bi];
      }
      if (canon[ai] != canon[bi]) return canon[ai] < canon[bi];
      return a < b;
    });
    std::string s = "(";
    for (int c : order) s += canon[static_cast<std::size_t>(c)];
    s += ")";
    canon[vi] = std::move(s);
    out.children[vi] = std::move(order);
  }
};

// Post-order node list and leftmost-leaf indices for the forest DP.
struct PostOrder {
  std::vector<int> leftmost;   // per postorder index
  std::vector<int> keyroots;   // postorder indices, ascending
  int size = 0;

  explicit PostOrder(const TreeShape& tree) {
    std::vector<int> post_of(tree.size(), -1);
    build(tree, tree.root, post_of);
    std::vector<bool> has_left_sibling(static_cast<std::size_t>(size), false);
    mark(tree, tree.root, post_of, has_left_sibling);
    for (int i = 0; i < size; ++i) {
      if (!has_left_sibling[static_cast<std::size_t>(i)]) continue;
      keyroots.push_back(i);
    }
    keyroots.push_back(size - 1);  // the root
  }

 private:
  int build(const TreeShape& tree, int v, std::vector<int>& post_of) {
    int first_leaf = -1;
    for (int c : tree.children[static_cast<std::size_t>(v)]) {
      int leaf = build(tree, c, post_of);
      if (first_leaf < 0) first_leaf = leaf;
    }
    int index = size++;
    post_of[static_cast<std::size_t>(v)] = index;
    leftmost.push_back(first_leaf < 0 ? index : first_leaf);
    return leftmost.back();
  }

  void mark(const TreeShape& tree, int v, const std::vector<int>& post_of,
            std::vector<bool>& has_left_sibling) const {
    const auto& kids = tree.children[static_cast<std::size_t>(v)];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      if (i > 0) {
        has_left_sibling[static_cast<std::size_t>(
            post_of[static_cast<std::size_t>(kids[i])])] = true;
      }
      mark(tree, kids[i], post_of, has_left_sibling);
    }
  }
};

}  // namespace

TreeShape canonicalize_tree(const TreeShape& tree) {
  if (tree.size() == 0 || tree.root < 0 ||
      tree.root >= static_cast<int>(tree.size())) {
    throw Error(ErrorCode::InvalidConfig, "malformed tree");
  }
  TreeShape out = tree;
  Canonicalizer canon(tree);
  canon.run(tree.root, out);
  return out;
}

int tree_edit_distance(const TreeShape& a_in, const TreeShape& b_in) {
  TreeShape a = canonicalize_tree(a_in);
  TreeShape b = canonicalize_tree(b_in);
  PostOrder pa(a), pb(b);
  const int n = pa.size, m = pb.size;
  std::vector<std::vector<int>> td(static_cast<std::size_t>(n),
                                   std::vector<int>(static_cast<std::size_t>(m), 0));
  std::vector<std::vector<int>> fd(static_cast<std::size_t>(n) + 1,
                                   std::vector<int>(static_cast<std::size_t>(m) + 1, 0));
  for (int ka : pa.keyroots) {
    for (int kb : pb.keyroots) {
      const int la = pa.leftmost[static_cast<std::size_t>(ka)];
      const int lb = pb.leftmost[static_cast<std::size_t>(kb)];
      fd[0][0] = 0;
      for (int x = la; x <= ka; ++x) {
        fd[static_cast<std::size_t>(x - la + 1)][0] =
            fd[static_cast<std::size_t>(x - la)][0] + 1;
      }
      for (int y = lb; y <= kb; ++y) {
        fd[0][static_cast<std::size_t>(y - lb + 1)] =
            fd[0][static_cast<std::size_t>(y - lb)] + 1;
      }
      for (int x = la; x <= ka; ++x) {
        for (int y = lb; y <= kb; ++y) {
          auto xi = static_cast<std::size_t>(x - la + 1);
          auto yi = static_cast<std::size_t>(y - lb + 1);
          int del = fd[xi - 1][yi] + 1;
          int ins = fd[xi][yi - 1] + 1;
          if (pa.leftmost[static_cast<std::size_t>(x)] == la &&
              pb.leftmost[static_cast<std::size_t>(y)] == lb) {
            int ren = fd[xi - 1][yi - 1];  // anonymous nodes: relabeling is free
            fd[xi][yi] = std::min({del, ins, ren});
            td[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] = fd[xi][yi];
          } else {
            auto fx = static_cast<std::size_t>(
                pa.leftmost[static_cast<std::size_t>(x)] - la);
            auto fy = static_cast<std::size_t>(
                pb.leftmost[static_cast<std::size_t>(y)] - lb);
            int sub = fd[fx][fy] +
                      td[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
            fd[xi][yi] = std::min({del, ins, sub});
          }
        }
      }
    }
  }
  return td[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(m - 1)];
}

double metric_ted(const KinematicTree& predicted, const KinematicTree& truth) {
  return tree_edit_distance(tree_shape(predicted), tree_shape(truth));
}

// Joint geometry ------------------------------------------------------------

std::vector<WorldJoint> world_joints(const UrdfModel& model) {
  std::map<std::string, Transform3D> rest = fk_frames(model, {});
  std::vector<WorldJoint> out;
  out.reserve(model.joints.size());
  for (const auto& j : model.joints) {
    WorldJoint w;
    w.name = j.name;
    w.parent_link = model.link_index(j.parent);
    w.child_link = model.link_index(j.child);
    const Transform3D& child = rest.at(j.child);
    w.axis = (child.R * j.axis).normalized();
    w.center = child.t;
    w.lower = j.lower;
    w.upper = j.upper;
    out.push_back(std::move(w));
  }
  return out;
}

double line_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  double c = std::abs(a.normalized().dot(b.normalized()));
  return std::acos(std::min(1.0, c));
}

double line_distance(const Eigen::Vector3d& axis_a, const Eigen::Vector3d& point_a,
                     const Eigen::Vector3d& axis_b, const Eigen::Vector3d& point_b) {
  Eigen::Vector3d da = axis_a.normalized();
  Eigen::Vector3d db = axis_b.normalized();
  Eigen::Vector3d n = da.cross(db);
  Eigen::Vector3d gap = point_b - point_a;
  if (n.norm() < 1e-9) {
    return (gap - gap.dot(da) * da).norm();
  }
  return std::abs(gap.dot(n.normalized()));
}

std::vector<int> match_joints(
    const std::vector<std::vector<std::size_t>>& pred_child_points,
    const std::vector<std::vector<std::size_t>>& truth_child_points,
    const std::vector<WorldJoint>& pred, const std::vector<WorldJoint>& truth) {
  if (pred_child_points.size() != pred.size() ||
      truth_child_points.size() != truth.size()) {
    throw Error(ErrorCode::ShapeMismatch, "joint point sets != joint count");
  }
  std::size_t universe = 0;
  for (const auto& s : truth_child_points) {
    for (std::size_t i : s) universe = std::max(universe, i + 1);
  }
  for (const auto& s : pred_child_points) {
    for (std::size_t i : s) universe = std::max(universe, i + 1);
  }
  std::vector<int> owner(universe, -1);  // point -> truth joint
  for (std::size_t g = 0; g < truth_child_points.size(); ++g) {
    for (std::size_t i : truth_child_points[g]) owner[i] = static_cast<int>(g);
  }
  std::vector<int> match(pred.size(), -1);
  for (std::size_t p = 0; p < pred.size(); ++p) {
    std::vector<int> overlap(truth.size(), 0);
    for (std::size_t i : pred_child_points[p]) {
      if (owner[i] >= 0) ++overlap[static_cast<std::size_t>(owner[i])];
    }
    int best = -1;
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (overlap[g] == 0) continue;
      if (best < 0 || overlap[g] > overlap[static_cast<std::size_t>(best)]) {
        best = static_cast<int>(g);
      } else if (overlap[g] == overlap[static_cast<std::size_t>(best)]) {
        double ang_g = line_angle(pred[p].axis, truth[g].axis);
        double ang_b =
            line_angle(pred[p].axis, truth[static_cast<std::size_t>(best)].axis);
        if (ang_g < ang_b) best = static_cast<int>(g);
      }
    }
    match[p] = best;
  }
  return match;
}

JointErrorStats metric_joint(const std::vector<WorldJoint>& pred,
                             const std::vector<WorldJoint>& truth,
                             const std::vector<int>& truth_of_pred) {
  if (truth_of_pred.size() != pred.size()) {
    throw Error(ErrorCode::ShapeMismatch, "correspondence size != joint count");
  }
  JointErrorStats stats;
  double sum_angle = 0.0, sum_dist = 0.0;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    int g = truth_of_pred[p];
    if (g < 0) continue;
    if (g >= static_cast<int>(truth.size())) {
      throw Error(ErrorCode::ShapeMismatch, "correspondence index out of range");
    }
    const WorldJoint& t = truth[static_cast<std::size_t>(g)];
    sum_angle += line_angle(pred[p].axis, t.axis);
    sum_dist += line_distance(pred[p].axis, pred[p].center, t.axis, t.center);
    ++stats.matched;
  }
  if (stats.matched == 0) {
    throw Error(ErrorCode::NoCorrespondence, "no predicted joint is matched");
  }
  stats.e_ja_deg = sum_angle / stats.matched * 180.0 / M_PI;
  stats.e_jd_mm = sum_dist / stats.matched * 1000.0;
  return stats;
}

double metric_repose(const UrdfModel& pred,
                     const std::vector<TriangleMesh>& pred_meshes,
                     const RobotSpec& truth,
                     const std::vector<int>& truth_of_pred, int trials,
                     int n_points, std::uint64_t seed) {
  if (trials < 1 || n_points < 1) {
    throw Error(ErrorCode::InvalidConfig, "repose needs trials >= 1, points >= 1");
  }
  if (pred_meshes.size() != pred.links.size()) {
    throw Error(ErrorCode::ShapeMismatch, "mesh count != link count");
  }
  std::vector<WorldJoint> pred_world = world_joints(pred);
  std::vector<WorldJoint> truth_world = world_joints(urdf_from_spec(truth));
  if (truth_of_pred.size() != pred_world.size()) {
    throw Error(ErrorCode::ShapeMismatch, "correspondence size != joint count");
  }
  bool any = false;
  for (int g : truth_of_pred) any = any || g >= 0;
  if (!any) {
    throw Error(ErrorCode::NoCorrespondence, "no predicted joint is matched");
  }

  // Shared command range per truth joint: its own limits intersected with the
  // (sign-corrected) limits of every predicted joint it drives.
  const std::size_t dof = truth_world.size();
  std::vector<double> lo(dof), hi(dof);
  std::vector<double> sign(pred_world.size(), 1.0);
  for (std::size_t g = 0; g < dof; ++g) {
    lo[g] = truth_world[g].lower;
    hi[g] = truth_world[g].upper;
  }
  for (std::size_t p = 0; p < pred_world.size(); ++p) {
    int g = truth_of_pred[p];
    if (g < 0) continue;
    auto gi = static_cast<std::size_t>(g);
    if (pred_world[p].axis.dot(truth_world[gi].axis) < 0.0) sign[p] = -1.0;
    double a = sign[p] * pred_world[p].lower;
    double b = sign[p] * pred_world[p].upper;
    lo[gi] = std::max(lo[gi], std::min(a, b));
    hi[gi] = std::min(hi[gi], std::max(a, b));
  }

  double sum_mm = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(derive_seed(seed, "repose", static_cast<std::uint64_t>(trial)));
    std::vector<double> truth_angles(dof, 0.0);
    for (std::size_t g = 0; g < dof; ++g) {
      truth_angles[g] = lo[g] <= hi[g] ? rng.uniform(lo[g], hi[g]) : 0.0;
    }
    std::map<std::string, double> pred_angles;
    for (std::size_t p = 0; p < pred_world.size(); ++p) {
      int g = truth_of_pred[p];
      pred_angles[pred_world[p].name] =
          g < 0 ? 0.0
                : sign[p] * truth_angles[static_cast<std::size_t>(g)];
    }

    PointCloud truth_cloud = sample_spec_surface(truth, truth_angles, n_points, rng);
    PointCloud pred_cloud =
        sample_surface(pred, pred_meshes, pred_angles,
                       static_cast<std::size_t>(n_points), rng);
    sum_mm += 1000.0 * chamfer_l1(pred_cloud, truth_cloud);
  }
  return sum_mm / trials;
}

// Report serialization ------------------------------------------------------

namespace {

json opt_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

std::optional<double> json_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void save_eval_report(const std::filesystem::path& path, const EvalReport& report) {
  json doc;
  doc["cd_mm"] = opt_json(report.cd_mm);
  doc["ted"] = opt_json(report.ted);
  doc["e_jd_mm"] = opt_json(report.e_jd_mm);
  doc["e_ja_deg"] = opt_json(report.e_ja_deg);
  doc["cd_r_mm"] = opt_json(report.cd_r_mm);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

EvalReport load_eval_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
    EvalReport report;
    report.cd_mm = json_opt(doc, "cd_mm");
    report.ted = json_opt(doc, "ted");
    report.e_jd_mm = json_opt(doc, "e_jd_mm");
    report.e_ja_deg = json_opt(doc, "e_ja_deg");
    report.cd_r_mm = json_opt(doc, "cd_r_mm");
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace kf
