#include "kinemaforge/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "kinemaforge/error.hpp"

namespace kf {

using json = nlohmann::ordered_json;

double SpecLink::surface_area() const {
  if (shape == LinkShape::Box) {
    return 2.0 * (width * depth + width * length + depth * length);
  }
  return 2.0 * M_PI * radius * length + 2.0 * M_PI * radius * radius;
}

namespace {

// Integer split of `total` proportional to `weights` (largest remainder).
// Every entry gets at least one item when total allows it, so no link ends
// up without surface samples.
std::vector<int> split_by_weight(const std::vector<double>& weights, int total) {
  const std::size_t n = weights.size();
  double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (n == 0 || sum <= 0.0) {
    throw Error(ErrorCode::InvalidConfig, "non-positive weight total");
  }
  std::vector<int> counts(n, 0);
  std::vector<std::pair<double, std::size_t>> frac(n);
  int assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double exact = total * weights[i] / sum;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    frac[i] = {exact - counts[i], i};
  }
  std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; r < total - assigned; ++r) {
    ++counts[frac[static_cast<std::size_t>(r) % n].second];
  }
  if (total >= static_cast<int>(n)) {
    for (std::size_t i = 0; i < n; ++i) {
      while (counts[i] == 0) {
        std::size_t richest =
            static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) -
                                     counts.begin());
        --counts[richest];
        ++counts[i];
      }
    }
  }
  return counts;
}

void sample_link_surface(const SpecLink& link, int n, Rng& rng,
                         std::vector<Eigen::Vector3d>& out) {
  if (link.shape == LinkShape::Box) {
    const double w = link.width, d = link.depth, l = link.length;
    const double areas[6] = {w * d, w * d, d * l, d * l, w * l, w * l};
    double cum[6];
    double acc = 0.0;
    for (int f = 0; f < 6; ++f) cum[f] = (acc += areas[f]);
    for (int i = 0; i < n; ++i) {
      double u = rng.uniform() * acc;
      int f = 0;
      while (f < 5 && u > cum[f]) ++f;
      double a = rng.uniform(), b = rng.uniform();
      switch (f) {
        case 0: out.emplace_back((a - 0.5) * w, (b - 0.5) * d, 0.0); break;
        case 1: out.emplace_back((a - 0.5) * w, (b - 0.5) * d, l); break;
        case 2: out.emplace_back(-0.5 * w, (a - 0.5) * d, b * l); break;
        case 3: out.emplace_back(0.5 * w, (a - 0.5) * d, b * l); break;
        case 4: out.emplace_back((a - 0.5) * w, -0.5 * d, b * l); break;
        default: out.emplace_back((a - 0.5) * w, 0.5 * d, b * l); break;
      }
    }
  } else {
    const double r = link.radius, l = link.length;
    const double lateral = 2.0 * M_PI * r * l;
    const double cap = M_PI * r * r;
    const double total = lateral + 2.0 * cap;
    for (int i = 0; i < n; ++i) {
      double u = rng.uniform() * total;
      double phi = rng.uniform(0.0, 2.0 * M_PI);
      if (u < lateral) {
        double z = rng.uniform(0.0, l);
        out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
      } else {
        double rho = r * std::sqrt(rng.uniform());
        double z = (u < lateral + cap) ? 0.0 : l;
        out.emplace_back(rho * std::cos(phi), rho * std::sin(phi), z);
      }
    }
  }
}

void validate_spec(const RobotSpec& spec) {
  if (spec.links.size() < 1 ||
      spec.joints.size() + 1 != spec.links.size()) {
    throw Error(ErrorCode::InvalidConfig, "spec joints must number links - 1");
  }
  for (std::size_t i = 0; i < spec.joints.size(); ++i) {
    const SpecJoint& j = spec.joints[i];
    if (j.child != static_cast<int>(i) + 1 || j.parent < 0 ||
        j.parent >= j.child) {
      throw Error(ErrorCode::InvalidConfig,
                  "spec joints must be ordered parent-before-child");
    }
  }
}

}  // namespace

RobotSpec random_robot_spec(const SynthOptions& opt, Rng& rng) {
  if (opt.num_links < 2) {
    throw Error(ErrorCode::InvalidConfig, "need at least two links");
  }
  RobotSpec spec;
  SpecLink base;
  base.shape = LinkShape::Box;
  base.length = opt.base_length;
  base.width = rng.uniform(opt.max_thickness, 1.6 * opt.max_thickness);
  base.depth = rng.uniform(opt.max_thickness, 1.6 * opt.max_thickness);
  spec.links.push_back(base);

  std::vector<Eigen::Matrix3d> rest_rot{Eigen::Matrix3d::Identity()};
  std::vector<int> child_count{0};

  for (int i = 1; i < opt.num_links; ++i) {
    int parent = i - 1;
    if (opt.branching == Branching::Star) {
      parent = 0;
    } else if (opt.branching == Branching::Mixed && i >= 2 &&
               rng.uniform() < 0.5) {
      parent = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i)));
    }

    SpecLink link;
    link.shape = rng.uniform() < 0.5 ? LinkShape::Box : LinkShape::Cylinder;
    link.length = rng.uniform(opt.min_length, opt.max_length);
    link.width = rng.uniform(opt.min_thickness, opt.max_thickness);
    link.depth = rng.uniform(opt.min_thickness, opt.max_thickness);
    link.radius = 0.5 * rng.uniform(opt.min_thickness, opt.max_thickness);

    SpecJoint joint;
    joint.parent = parent;
    joint.child = i;
    // A first child hangs off the parent tip; later (branch) children attach
    // part-way up so the arms do not coincide.
    double along = child_count[static_cast<std::size_t>(parent)] == 0
                       ? 1.0
                       : rng.uniform(0.45, 0.8);
    joint.origin = Eigen::Vector3d(0.0, 0.0, along * spec.links[static_cast<std::size_t>(parent)].length);
    double tilt = rng.uniform(12.0 * M_PI / 180.0, 30.0 * M_PI / 180.0);
    double dir = rng.uniform(0.0, 2.0 * M_PI);
    double roll = rng.uniform(0.0, 2.0 * M_PI);
    joint.basis =
        rotation_from_axis_angle({std::cos(dir), std::sin(dir), 0.0}, tilt) *
        rotation_from_axis_angle(Eigen::Vector3d::UnitZ(), roll);

    Eigen::Matrix3d rot_w = rest_rot[static_cast<std::size_t>(parent)] * joint.basis;
    bool has_prev = parent > 0;
    Eigen::Vector3d prev_axis_w = Eigen::Vector3d::UnitZ();
    if (has_prev) {
      prev_axis_w = rest_rot[static_cast<std::size_t>(parent)] *
                    spec.joints[static_cast<std::size_t>(parent - 1)].axis;
    }
    // Rejection-sample the axis; if no candidate satisfies both constraints
    // keep the least-violating one.
    Eigen::Vector3d best_axis = Eigen::Vector3d::UnitX();
    double best_score = -1e100;
    for (int tries = 0; tries < 128; ++tries) {
      Eigen::Vector3d cand = rng.gaussian3();
      if (cand.norm() < 1e-9) continue;
      cand.normalize();
      double tilt_angle = std::acos(std::min(1.0, std::abs(cand.z())));
      double sep = M_PI / 2.0;
      if (has_prev) {
        double c = std::abs((rot_w * cand).dot(prev_axis_w));
        sep = std::acos(std::min(1.0, c));
      }
      double score = std::min(tilt_angle - opt.min_axis_tilt,
                              sep - opt.min_axis_separation);
      if (score > best_score) {
        best_score = score;
        best_axis = cand;
      }
      if (score >= 0.0) break;
    }
    joint.axis = best_axis;
    joint.lower = -rng.uniform(0.7, 1.6);
    joint.upper = rng.uniform(0.7, 1.6);

    spec.joints.push_back(joint);
    spec.links.push_back(link);
    rest_rot.push_back(rot_w);
    child_count.push_back(0);
    ++child_count[static_cast<std::size_t>(parent)];
  }
  return spec;
}

RobotSpec random_chain(int dof, Branching branching, std::uint64_t seed) {
  if (dof < 1 || dof > 18) {
    throw Error(ErrorCode::InvalidConfig, "dof must be in [1, 18]");
  }
  SynthOptions opt;
  opt.num_links = dof + 1;
  opt.branching = branching;
  Rng rng(derive_seed(seed, "robot-spec"));
  return random_robot_spec(opt, rng);
}

std::vector<Transform3D> spec_fk(const RobotSpec& spec,
                                 const std::vector<double>& angles) {
  validate_spec(spec);
  if (static_cast<int>(angles.size()) != spec.dof()) {
    throw Error(ErrorCode::ShapeMismatch, "angle count != joint count");
  }
  std::vector<Transform3D> world(spec.links.size());
  for (std::size_t i = 0; i < spec.joints.size(); ++i) {
    const SpecJoint& j = spec.joints[i];
    Transform3D local;
    local.R = j.basis * rotation_from_axis_angle(j.axis.normalized(), angles[i]);
    local.t = j.origin;
    world[static_cast<std::size_t>(j.child)] =
        world[static_cast<std::size_t>(j.parent)] * local;
  }
  return world;
}

std::vector<PointCloud> sample_material_points(const RobotSpec& spec,
                                               int total_points, Rng& rng) {
  validate_spec(spec);
  if (total_points < static_cast<int>(spec.links.size())) {
    throw Error(ErrorCode::InvalidConfig, "too few points for the link count");
  }
  std::vector<double> areas;
  areas.reserve(spec.links.size());
  for (const auto& link : spec.links) areas.push_back(link.surface_area());
  std::vector<int> counts = split_by_weight(areas, total_points);
  std::vector<PointCloud> material(spec.links.size());
  for (std::size_t i = 0; i < spec.links.size(); ++i) {
    material[i].pts.reserve(static_cast<std::size_t>(counts[i]));
    sample_link_surface(spec.links[i], counts[i], rng, material[i].pts);
  }
  return material;
}

std::vector<std::vector<double>> random_trajectory(const RobotSpec& spec,
                                                   int num_frames, Rng& rng,
                                                   double max_step,
                                                   double min_first_target) {
  validate_spec(spec);
  if (num_frames < 1) {
    throw Error(ErrorCode::InvalidConfig, "need at least one frame");
  }
  const int d = spec.dof();
  std::vector<std::vector<double>> traj(
      static_cast<std::size_t>(num_frames),
      std::vector<double>(static_cast<std::size_t>(d), 0.0));
  std::vector<double> theta(static_cast<std::size_t>(d), 0.0);
  std::vector<double> target(static_cast<std::size_t>(d), 0.0);
  std::vector<double> speed(static_cast<std::size_t>(d), 0.0);
  for (int j = 0; j < d; ++j) {
    const SpecJoint& sj = spec.joints[static_cast<std::size_t>(j)];
    double best = 0.0;
    for (int tries = 0; tries < 64; ++tries) {
      double cand = rng.uniform(sj.lower, sj.upper);
      if (std::abs(cand) > std::abs(best)) best = cand;
      if (std::abs(best) >= min_first_target) break;
    }
    target[static_cast<std::size_t>(j)] = best;
    // Each joint gets its own cruising speed so the angle curves have
    // distinct slopes instead of marching toward their waypoints in
    // lockstep; identical ramps would make separate joints look like one.
    speed[static_cast<std::size_t>(j)] = rng.uniform(0.55, 1.0);
  }
  for (int f = 1; f < num_frames; ++f) {
    for (int j = 0; j < d; ++j) {
      const SpecJoint& sj = spec.joints[static_cast<std::size_t>(j)];
      auto ji = static_cast<std::size_t>(j);
      double delta = target[ji] - theta[ji];
      if (std::abs(delta) < 1e-9) {
        target[ji] = rng.uniform(sj.lower, sj.upper);
        delta = target[ji] - theta[ji];
      }
      double step = max_step * speed[ji] * rng.uniform(0.7, 1.0);
      theta[ji] += std::clamp(delta, -step, step);
      traj[static_cast<std::size_t>(f)][ji] = theta[ji];
    }
  }
  return traj;
}

FrameSequence render_sequence(const RobotSpec& spec,
                              const std::vector<PointCloud>& material,
                              const std::vector<std::vector<double>>& trajectory,
                              double noise_sigma, double drift_sigma, Rng& rng,
                              GroundTruth* gt) {
  validate_spec(spec);
  if (material.size() != spec.links.size()) {
    throw Error(ErrorCode::ShapeMismatch, "material clouds != link count");
  }
  if (trajectory.empty()) {
    throw Error(ErrorCode::EmptySequence, "trajectory has no frames");
  }
  FrameSequence seq;
  seq.source_id = "synthetic";
  std::vector<int> frame_labels;
  for (std::size_t l = 0; l < material.size(); ++l) {
    frame_labels.insert(frame_labels.end(), material[l].size(),
                        static_cast<int>(l));
  }
  if (gt != nullptr) {
    gt->spec = spec;
    gt->trajectory = trajectory;
    gt->link_poses.clear();
    gt->labels.clear();
  }
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const auto& angles = trajectory[t];
    std::vector<Transform3D> fk = spec_fk(spec, angles);
    Transform3D drift;
    // Frame 0 stays at the exact rest pose: it is the shared reference that
    // aligns sequences of the same scene.
    if (drift_sigma > 0.0 && t > 0) drift.t = drift_sigma * rng.gaussian3();
    PointCloud frame;
    std::vector<Pose> poses;
    poses.reserve(fk.size());
    for (std::size_t l = 0; l < material.size(); ++l) {
      Transform3D world = drift * fk[l];
      poses.push_back(transform_to_pose(world));
      for (const auto& q : material[l].pts) {
        Eigen::Vector3d p = world.apply(q);
        if (noise_sigma > 0.0) p += noise_sigma * rng.gaussian3();
        frame.pts.push_back(p);
      }
    }
    seq.frames.push_back(std::move(frame));
    if (gt != nullptr) {
      gt->link_poses.push_back(std::move(poses));
      gt->labels.push_back(frame_labels);
    }
  }
  return seq;
}

void apply_occlusion(FrameSequence& seq, GroundTruth* gt, int k,
                     std::uint64_t seed) {
  if (k <= 0) return;
  if (gt != nullptr && gt->labels.size() != seq.frames.size()) {
    throw Error(ErrorCode::ShapeMismatch, "label frames != sequence frames");
  }
  Rng rng(derive_seed(seed, "occlusion"));
  std::vector<Eigen::Vector3d> dirs;
  for (int v = 0; v < k; ++v) {
    Eigen::Vector3d d = rng.gaussian3();
    while (d.norm() < 1e-9) d = rng.gaussian3();
    dirs.push_back(d.normalized());
  }
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    PointCloud& cloud = seq.frames[f];
    if (cloud.empty()) continue;
    const double diag = bbox(cloud).diagonal();
    const double cell = std::max(diag / 128.0, 1e-9);
    std::vector<bool> visible(cloud.size(), false);
    for (const auto& d : dirs) {
      // Orthographic camera looking along +d: a point is visible when it is
      // within ~1.5 cells of the nearest depth in its grid pixel.
      Eigen::Vector3d u = d.unitOrthogonal();
      Eigen::Vector3d v = d.cross(u);
      std::map<std::pair<long, long>, double> min_depth;
      std::vector<std::tuple<long, long, double>> proj(cloud.size());
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d& p = cloud.pts[i];
        long gx = std::lround(p.dot(u) / cell);
        long gy = std::lround(p.dot(v) / cell);
        double depth = p.dot(d);
        proj[i] = {gx, gy, depth};
        auto it = min_depth.find({gx, gy});
        if (it == min_depth.end() || depth < it->second) {
          min_depth[{gx, gy}] = depth;
        }
      }
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        auto [gx, gy, depth] = proj[i];
        if (depth <= min_depth[{gx, gy}] + 1.5 * cell) visible[i] = true;
      }
    }
    PointCloud kept;
    std::vector<int> kept_labels;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (!visible[i]) continue;
      kept.pts.push_back(cloud.pts[i]);
      if (gt != nullptr) kept_labels.push_back(gt->labels[f][i]);
    }
    cloud = std::move(kept);
    if (gt != nullptr) gt->labels[f] = std::move(kept_labels);
  }
}

PointCloud sample_spec_surface(const RobotSpec& spec,
                               const std::vector<double>& angles,
                               int total_points, Rng& rng) {
  std::vector<PointCloud> local = sample_material_points(spec, total_points, rng);
  std::vector<Transform3D> fk = spec_fk(spec, angles);
  PointCloud out;
  out.pts.reserve(static_cast<std::size_t>(total_points));
  for (std::size_t l = 0; l < local.size(); ++l) {
    for (const auto& q : local[l].pts) out.pts.push_back(fk[l].apply(q));
  }
  return out;
}

UrdfModel urdf_from_spec(const RobotSpec& spec, const std::string& name) {
  validate_spec(spec);
  UrdfModel model;
  model.name = name;
  for (std::size_t i = 0; i < spec.links.size(); ++i) {
    UrdfLink link;
    link.name = "link_" + std::to_string(i);
    link.has_geometry = false;
    model.links.push_back(std::move(link));
  }
  for (const auto& j : spec.joints) {
    UrdfJoint out;
    out.name = "joint_" + std::to_string(j.parent) + "_" + std::to_string(j.child);
    out.parent = "link_" + std::to_string(j.parent);
    out.child = "link_" + std::to_string(j.child);
    out.origin.xyz = j.origin;
    out.origin.rpy = matrix_to_rpy(j.basis);
    out.axis = j.axis.normalized();
    out.lower = j.lower;
    out.upper = j.upper;
    model.joints.push_back(std::move(out));
  }
  return model;
}

// Serialization ------------------------------------------------------------

namespace {

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d json_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::ParseError, "expected a 3-vector");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json spec_json(const RobotSpec& spec) {
  json links = json::array();
  for (const auto& l : spec.links) {
    links.push_back({{"shape", l.shape == LinkShape::Box ? "box" : "cylinder"},
                     {"length", l.length},
                     {"width", l.width},
                     {"depth", l.depth},
                     {"radius", l.radius}});
  }
  json joints = json::array();
  for (const auto& j : spec.joints) {
    json basis = json::array();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) basis.push_back(j.basis(r, c));
    }
    joints.push_back({{"parent", j.parent},
                      {"child", j.child},
                      {"origin", vec3_json(j.origin)},
                      {"basis", basis},
                      {"axis", vec3_json(j.axis)},
                      {"lower", j.lower},
                      {"upper", j.upper}});
  }
  return {{"links", links}, {"joints", joints}};
}

RobotSpec json_spec(const json& j) {
  RobotSpec spec;
  for (const auto& l : j.at("links")) {
    SpecLink link;
    std::string shape = l.at("shape").get<std::string>();
    if (shape == "box") {
      link.shape = LinkShape::Box;
    } else if (shape == "cylinder") {
      link.shape = LinkShape::Cylinder;
    } else {
      throw Error(ErrorCode::ParseError, "unknown link shape " + shape);
    }
    link.length = l.at("length").get<double>();
    link.width = l.at("width").get<double>();
    link.depth = l.at("depth").get<double>();
    link.radius = l.at("radius").get<double>();
    spec.links.push_back(link);
  }
  for (const auto& jj : j.at("joints")) {
    SpecJoint joint;
    joint.parent = jj.at("parent").get<int>();
    joint.child = jj.at("child").get<int>();
    joint.origin = json_vec3(jj.at("origin"));
    const auto& basis = jj.at("basis");
    if (!basis.is_array() || basis.size() != 9) {
      throw Error(ErrorCode::ParseError, "joint basis must have 9 entries");
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        joint.basis(r, c) = basis[static_cast<std::size_t>(3 * r + c)].get<double>();
      }
    }
    joint.axis = json_vec3(jj.at("axis"));
    joint.lower = jj.at("lower").get<double>();
    joint.upper = jj.at("upper").get<double>();
    spec.joints.push_back(joint);
  }
  validate_spec(spec);
  return spec;
}

}  // namespace

void save_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
  json doc;
  doc["spec"] = spec_json(gt.spec);
  doc["trajectory"] = gt.trajectory;
  json poses = json::array();
  for (const auto& frame : gt.link_poses) {
    json row = json::array();
    for (const auto& p : frame) {
      row.push_back(json::array({p.position.x(), p.position.y(), p.position.z(),
                                 p.orientation.w, p.orientation.x,
                                 p.orientation.y, p.orientation.z}));
    }
    poses.push_back(std::move(row));
  }
  doc["link_poses"] = std::move(poses);
  doc["labels"] = gt.labels;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
    GroundTruth gt;
    gt.spec = json_spec(doc.at("spec"));
    gt.trajectory =
        doc.at("trajectory").get<std::vector<std::vector<double>>>();
    for (const auto& row : doc.at("link_poses")) {
      std::vector<Pose> frame;
      for (const auto& p : row) {
        if (!p.is_array() || p.size() != 7) {
          throw Error(ErrorCode::ParseError, "pose must have 7 entries");
        }
        Pose pose;
        pose.position = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
        pose.orientation = {p[3].get<double>(), p[4].get<double>(),
                            p[5].get<double>(), p[6].get<double>()};
        frame.push_back(pose);
      }
      gt.link_poses.push_back(std::move(frame));
    }
    gt.labels = doc.at("labels").get<std::vector<std::vector<int>>>();
    return gt;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace kf
