#include "kinemaforge/pipeline.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "kinemaforge/error.hpp"
#include "kinemaforge/joints.hpp"
#include "kinemaforge/parallel.hpp"
#include "kinemaforge/registration.hpp"
#include "kinemaforge/segmentation.hpp"
#include "kinemaforge/synthgen.hpp"
#include "kinemaforge/topology.hpp"
#include "kinemaforge/urdf.hpp"

namespace kf {

namespace {

constexpr Stage kStages[] = {Stage::Register, Stage::Segment, Stage::Topology,
                             Stage::Joints,   Stage::Mesh,    Stage::Urdf};

int stage_rank(Stage s) { return static_cast<int>(s); }

// Re-tags an error with the stage it came from; the original code survives.
[[noreturn]] void rethrow_tagged(const Error& e, Stage stage) {
  std::string text = e.what();
  const std::string prefix = std::string(error_code_name(e.code())) + ": ";
  if (text.rfind(prefix, 0) == 0) text = text.substr(prefix.size());
  throw Error(e.code(), stage_name(stage) + " stage: " + text);
}

std::string link_obj_name(int id) {
  return "link_" + std::to_string(id) + ".obj";
}

// Numeric id at the end of a generated link name ("link_7" -> 7).
int trailing_id(const std::string& name) {
  std::size_t pos = name.find_last_of('_');
  if (pos == std::string::npos || pos + 1 >= name.size()) {
    throw Error(ErrorCode::ParseError, "link name without id: " + name);
  }
  try {
    return std::stoi(name.substr(pos + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "link name without id: " + name);
  }
}

}  // namespace

Stage parse_stage(const std::string& name) {
  for (Stage s : kStages) {
    if (stage_name(s) == name) return s;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown stage: " + name);
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Register: return "register";
    case Stage::Segment: return "segment";
    case Stage::Topology: return "topology";
    case Stage::Joints: return "joints";
    case Stage::Mesh: return "mesh";
    case Stage::Urdf: return "urdf";
  }
  return "?";
}

std::filesystem::path run_pipeline(const PipelineConfig& cfg, Stage from,
                                   Stage to) {
  if (cfg.sequences.empty()) {
    throw Error(ErrorCode::InvalidConfig, "no input sequences");
  }
  if (cfg.name.empty()) {
    throw Error(ErrorCode::InvalidConfig, "empty bundle name");
  }
  if (stage_rank(from) > stage_rank(to)) {
    throw Error(ErrorCode::InvalidConfig, "from-stage is after to-stage");
  }
  const std::filesystem::path root = cfg.out / cfg.name;
  const std::filesystem::path report = root / "report";
  const std::filesystem::path mesh_dir = root / "meshes";
  std::filesystem::create_directories(report);
  std::filesystem::create_directories(mesh_dir);

  std::vector<FrameSequence> seqs;
  seqs.reserve(cfg.sequences.size());
  for (const auto& dir : cfg.sequences) {
    FrameSequence seq = load_sequence(dir);
    if (seq.frames.size() < 2) {
      throw Error(ErrorCode::EmptySequence,
                  "sequence " + seq.source_id + " needs at least 2 frames");
    }
    seqs.push_back(std::move(seq));
  }

  Bbox scene = bbox(seqs[0].frames.at(0));
  for (const auto& seq : seqs) {
    for (const auto& frame : seq.frames) {
      Bbox b = bbox(frame);
      scene.min = scene.min.cwiseMin(b.min);
      scene.max = scene.max.cwiseMax(b.max);
    }
  }
  const double scene_diag = scene.diagonal();

  // --- register -----------------------------------------------------------
  std::vector<ClusterTrack> tracks;
  if (stage_rank(from) <= stage_rank(Stage::Register)) {
    try {
      for (std::size_t i = 1; i < seqs.size(); ++i) {
        double gap = chamfer_l1(seqs[i].frames.at(0), seqs[0].frames.at(0));
        if (gap > 0.02 * scene_diag) {
          throw Error(ErrorCode::AlignmentError,
                      "sequence " + std::to_string(i) +
                          " does not start at the shared rest configuration "
                          "(frame-0 Chamfer " +
                          std::to_string(gap) + ")");
        }
      }
      tracks.resize(seqs.size());
      tracks[0] = register_sequence(seqs[0], cfg.clusters, cfg.regressor,
                                    derive_seed(cfg.seed, "register", 0));
      if (seqs.size() > 1) {
        InitialClusters init = initial_clusters_from_track(tracks[0]);
        parallel_for(seqs.size() - 1, [&](std::size_t i) {
          tracks[i + 1] =
              register_sequence(seqs[i + 1], init, cfg.regressor,
                                derive_seed(cfg.seed, "register", i + 1));
        });
      }
      save_tracks(report / "track.json", tracks);
    } catch (const Error& e) {
      rethrow_tagged(e, Stage::Register);
    }
  } else {
    tracks = load_tracks(report / "track.json");
  }
  if (to == Stage::Register) return root;

  // --- segment ------------------------------------------------------------
  PartLabeling labeling;
  double alpha = cfg.alpha;
  if (stage_rank(from) <= stage_rank(Stage::Segment)) {
    try {
      if (alpha <= 0.0) alpha = default_alpha(scene_diag);
      std::vector<Eigen::MatrixXd> mats;
      mats.reserve(tracks.size());
      for (const auto& track : tracks) {
        mats.push_back(correlation_matrix(track, alpha, cfg.corr_use_pos,
                                          cfg.corr_use_ori));
      }
      Eigen::MatrixXd corr = merge_correlations(mats);
      labeling = group_parts(corr, cfg.k_min, cfg.k_max);
      save_segmentation_report(report / "segmentation_report.json", corr,
                               labeling, alpha);
    } catch (const Error& e) {
      rethrow_tagged(e, Stage::Segment);
    }
  } else {
    SegmentationReport loaded =
        load_segmentation_report(report / "segmentation_report.json");
    labeling = loaded.labeling;
    alpha = loaded.alpha;
  }
  if (to == Stage::Segment) return root;

  // --- topology -----------------------------------------------------------
  KinematicTree tree;
  if (stage_rank(from) <= stage_rank(Stage::Topology)) {
    try {
      std::vector<WeightedEdge> graph =
          part_distance_graph(tracks, labeling.labels, labeling.k);
      std::vector<WeightedEdge> mst = build_mst(labeling.k, graph);
      int base = select_root(tracks, labeling.labels, labeling.k);
      tree = infer_topology(labeling.k, mst, base, labeling.labels);
      save_topology(report / "topology.json", tree);
    } catch (const Error& e) {
      rethrow_tagged(e, Stage::Topology);
    }
  } else {
    tree = load_topology(report / "topology.json");
  }
  if (to == Stage::Topology) return root;

  LinkPoseTrack link_track = link_pose_track(tracks, tree);

  // --- joints -------------------------------------------------------------
  std::vector<RevoluteJoint> joints;
  if (stage_rank(from) <= stage_rank(Stage::Joints)) {
    try {
      joints = estimate_joints(tracks, tree, link_track);
      save_joints(report / "joints.json", joints);
    } catch (const Error& e) {
      rethrow_tagged(e, Stage::Joints);
    }
  } else {
    joints = load_joints(report / "joints.json");
  }
  if (to == Stage::Joints) return root;

  // --- mesh ---------------------------------------------------------------
  if (stage_rank(from) <= stage_rank(Stage::Mesh)) {
    try {
      for (std::size_t link = 0; link < tree.links.size(); ++link) {
        PointCloud cloud = accumulate_link_cloud(tracks, seqs, tree, link_track,
                                                 static_cast<int>(link));
        VoxelGrid grid = distance_grid(cloud, cfg.meshing);
        TriangleMesh mesh =
            marching_cubes(grid, cfg.meshing.iso_factor * grid.cell);
        save_obj(mesh_dir / link_obj_name(static_cast<int>(link)), mesh);
      }
    } catch (const Error& e) {
      rethrow_tagged(e, Stage::Mesh);
    }
  }
  if (to == Stage::Mesh) return root;

  // --- urdf ---------------------------------------------------------------
  try {
    std::vector<std::string> mesh_files;
    mesh_files.reserve(tree.links.size());
    for (std::size_t link = 0; link < tree.links.size(); ++link) {
      mesh_files.push_back("meshes/" + link_obj_name(static_cast<int>(link)));
    }
    UrdfModel model = build_urdf(tree, joints, link_track.poses.at(0),
                                 mesh_files, cfg.name);
    save_urdf(root / "model.urdf", model);
  } catch (const Error& e) {
    rethrow_tagged(e, Stage::Urdf);
  }
  return root;
}

EvalReport evaluate_bundle(const std::filesystem::path& bundle,
                           const std::filesystem::path& truth_json,
                           const EvalOptions& opt) {
  const std::filesystem::path report_dir = bundle / "report";
  GroundTruth gt = load_ground_truth(truth_json);
  std::vector<ClusterTrack> tracks = load_tracks(report_dir / "track.json");
  KinematicTree tree = load_topology(report_dir / "topology.json");
  UrdfModel model = load_urdf(bundle / "model.urdf");

  EvalReport out;

  // Registration Chamfer needs the raw frames back; the track remembers where
  // they came from.
  try {
    double sum = 0.0;
    for (const auto& track : tracks) {
      FrameSequence seq = load_sequence(track.source_id);
      sum += metric_cd(track, seq).mean_mm;
    }
    out.cd_mm = sum / static_cast<double>(tracks.size());
  } catch (const Error& e) {
    std::fprintf(stderr, "eval: skipping cd (%s)\n", e.what());
  }

  std::vector<int> truth_parents(gt.spec.links.size(), -1);
  for (const auto& j : gt.spec.joints) {
    truth_parents[static_cast<std::size_t>(j.child)] = j.parent;
  }
  out.ted = tree_edit_distance(tree_shape(tree),
                               tree_from_parents(truth_parents));

  std::vector<int> match;
  std::vector<WorldJoint> pred_world, truth_world;
  try {
    pred_world = world_joints(model);
    truth_world = world_joints(urdf_from_spec(gt.spec));
    if (gt.labels.empty() || tracks.empty()) {
      throw Error(ErrorCode::ShapeMismatch, "missing frame-0 labels");
    }
    const std::vector<int>& cluster_of = tracks[0].memberships.at(0).labels;
    const std::vector<int>& truth_label = gt.labels[0];
    if (cluster_of.size() != truth_label.size()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "ground-truth labels do not match the first sequence");
    }
    // Child point sets at frame 0, on both sides.
    std::vector<std::vector<std::size_t>> pred_pts(pred_world.size());
    for (std::size_t p = 0; p < pred_world.size(); ++p) {
      int part = trailing_id(model.joints[p].child);
      std::vector<bool> in_part(tracks[0].cluster_count(), false);
      for (int c : tree.links.at(static_cast<std::size_t>(part)).clusters) {
        in_part[static_cast<std::size_t>(c)] = true;
      }
      for (std::size_t i = 0; i < cluster_of.size(); ++i) {
        if (in_part[static_cast<std::size_t>(cluster_of[i])]) {
          pred_pts[p].push_back(i);
        }
      }
    }
    std::vector<std::vector<std::size_t>> truth_pts(truth_world.size());
    for (std::size_t g = 0; g < truth_world.size(); ++g) {
      int child = truth_world[g].child_link;
      for (std::size_t i = 0; i < truth_label.size(); ++i) {
        if (truth_label[i] == child) truth_pts[g].push_back(i);
      }
    }
    match = match_joints(pred_pts, truth_pts, pred_world, truth_world);
    JointErrorStats stats = metric_joint(pred_world, truth_world, match);
    out.e_ja_deg = stats.e_ja_deg;
    out.e_jd_mm = stats.e_jd_mm;
  } catch (const Error& e) {
    std::fprintf(stderr, "eval: skipping joint errors (%s)\n", e.what());
  }

  try {
    if (match.empty()) {
      throw Error(ErrorCode::NoCorrespondence, "no joint correspondence");
    }
    std::vector<TriangleMesh> meshes(model.links.size());
    for (std::size_t l = 0; l < model.links.size(); ++l) {
      if (!model.links[l].has_geometry) continue;
      meshes[l] = load_obj(bundle / model.links[l].mesh_filename);
    }
    out.cd_r_mm = metric_repose(model, meshes, gt.spec, match,
                                opt.repose_trials, opt.repose_points, opt.seed);
  } catch (const Error& e) {
    std::fprintf(stderr, "eval: skipping repose (%s)\n", e.what());
  }

  save_eval_report(bundle / "eval_report.json", out);
  return out;
}

void export_plots(const std::filesystem::path& report_dir) {
  SegmentationReport rep =
      load_segmentation_report(report_dir / "segmentation_report.json");
  char buf[64];
  {
    std::ofstream out(report_dir / "correlation.csv", std::ios::binary);
    if (!out) {
      throw Error(ErrorCode::IoError, "cannot write correlation.csv");
    }
    for (Eigen::Index r = 0; r < rep.corr.rows(); ++r) {
      for (Eigen::Index c = 0; c < rep.corr.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.9g", rep.corr(r, c));
        out << (c ? "," : "") << buf;
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(report_dir / "silhouette.csv", std::ios::binary);
    if (!out) {
      throw Error(ErrorCode::IoError, "cannot write silhouette.csv");
    }
    out << "k,silhouette\n";
    for (const auto& [k, score] : rep.labeling.curve) {
      std::snprintf(buf, sizeof(buf), "%.9g", score);
      out << k << "," << buf << "\n";
    }
  }
}

}  // namespace kf
