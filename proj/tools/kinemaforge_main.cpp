// kinemaforge command line front end.
//
//   synthgen   generate a synthetic articulated scan plus ground truth
//   register   cluster registration only (writes report/track.json)
//   segment    rigid-part grouping from a saved registration
//   build      full pipeline: scan directories in, URDF bundle out
//   eval       compare a finished bundle against ground truth
//   plot       dump correlation / silhouette CSVs from a report directory
//
// Options may come from a `key = value` config file (`--config`, `#`
// comments); explicit command line flags override file values.  When no
// --seed is given the KINEMAFORGE_SEED environment variable is used.
//
// Exit codes: 0 success, 1 pipeline failure, 2 usage / configuration error.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "kinemaforge/error.hpp"
#include "kinemaforge/parallel.hpp"
#include "kinemaforge/pipeline.hpp"
#include "kinemaforge/pointcloud.hpp"
#include "kinemaforge/rng.hpp"
#include "kinemaforge/synthgen.hpp"

namespace fs = std::filesystem;

namespace {

std::uint64_t default_seed() {
  const char* env = std::getenv("KINEMAFORGE_SEED");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  unsigned long long value = std::strtoull(env, &end, 10);
  if (end == nullptr || *end != '\0') return 0;
  return value;
}

// Sequence directories listed one per line, blank lines and '#' comments
// ignored, relative entries resolved against the manifest's own directory.
std::vector<fs::path> read_manifest_paths(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw kf::Error(kf::ErrorCode::IoError,
                    "cannot open manifest " + path.string());
  }
  std::vector<fs::path> dirs;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    const std::size_t stop = line.find_last_not_of(" \t\r");
    fs::path dir = line.substr(start, stop - start + 1);
    if (dir.is_relative()) dir = path.parent_path() / dir;
    dirs.push_back(dir);
  }
  return dirs;
}

struct PipelineArgs {
  kf::PipelineConfig cfg;
  std::string manifest;
  std::string rotation = "quat";
  std::string from_stage = "register";
  bool no_pos = false;
  bool no_ori = false;
  bool no_anchor = false;
  bool direct = false;
  int jobs = 1;
};

void add_pipeline_options(CLI::App* cmd, PipelineArgs& a) {
  cmd->set_config("--config", "", "Read options from a key = value file");
  cmd->add_option("--sequence", a.cfg.sequences,
                  "Scan sequence directory (repeat for multi-sequence input)")
      ->delimiter(',');
  cmd->add_option("--manifest", a.manifest,
                  "File listing sequence directories, one per line");
  cmd->add_option("--out", a.cfg.out, "Output root directory")
      ->capture_default_str();
  cmd->add_option("--name", a.cfg.name, "Robot name used inside the bundle")
      ->capture_default_str();
  cmd->add_option("--clusters", a.cfg.clusters,
                  "Number of registration clusters per sequence")
      ->capture_default_str();
  cmd->add_option("--k-min", a.cfg.k_min, "Smallest part count considered")
      ->capture_default_str();
  cmd->add_option("--k-max", a.cfg.k_max, "Largest part count considered")
      ->capture_default_str();
  cmd->add_option("--alpha", a.cfg.alpha,
                  "Positional weight in the correlation distance "
                  "(<= 0: pi / scene diagonal)");
  cmd->add_flag("--no-pos", a.no_pos,
                "Drop the positional term from the correlation distance");
  cmd->add_flag("--no-ori", a.no_ori,
                "Drop the orientational term from the correlation distance");
  cmd->add_option("--rotation", a.rotation,
                  "Pose rotation parameterization for the regressors")
      ->check(CLI::IsMember({"quat", "rot6d"}))
      ->capture_default_str();
  cmd->add_option("--lr-step", a.cfg.regressor.lr_step,
                  "Learning rate for the step network pass")
      ->capture_default_str();
  cmd->add_option("--lr-anchor", a.cfg.regressor.lr_anchor,
                  "Learning rate for the anchor refinement pass")
      ->capture_default_str();
  cmd->add_option("--iters", a.cfg.regressor.max_iters,
                  "Optimization iteration cap per frame pair")
      ->capture_default_str();
  cmd->add_option("--patience", a.cfg.regressor.patience,
                  "Early-stop patience (iterations without improvement)")
      ->capture_default_str();
  cmd->add_flag("--no-anchor", a.no_anchor, "Skip the anchor refinement pass");
  cmd->add_flag("--direct", a.direct,
                "Optimize pose parameters directly instead of through the "
                "networks");
  cmd->add_option("--mesh-resolution", a.cfg.meshing.resolution,
                  "Voxel grid cells along the longest part axis")
      ->capture_default_str();
  cmd->add_option("--truncation", a.cfg.meshing.truncation_factor,
                  "Distance field truncation, in cell widths")
      ->capture_default_str();
  cmd->add_option("--pad-cells", a.cfg.meshing.pad_cells,
                  "Empty cells padded around each part's bounding box")
      ->capture_default_str();
  cmd->add_option("--iso", a.cfg.meshing.iso_factor,
                  "Extraction isovalue, in cell widths")
      ->capture_default_str();
  cmd->add_option("--seed", a.cfg.seed, "Deterministic run seed")
      ->capture_default_str();
  cmd->add_option("--jobs", a.jobs,
                  "Concurrent registration workers (0: all cores)")
      ->capture_default_str();
}

kf::PipelineConfig make_config(const PipelineArgs& a) {
  kf::PipelineConfig cfg = a.cfg;
  if (!a.manifest.empty()) {
    for (fs::path& dir : read_manifest_paths(a.manifest)) {
      cfg.sequences.push_back(std::move(dir));
    }
  }
  cfg.corr_use_pos = !a.no_pos;
  cfg.corr_use_ori = !a.no_ori;
  cfg.regressor.use_anchor = !a.no_anchor;
  cfg.regressor.direct = a.direct;
  cfg.regressor.rotation_repr = a.rotation == "rot6d"
                                    ? kf::RotationRepr::Rot6D
                                    : kf::RotationRepr::Quaternion;
  kf::set_max_threads(a.jobs);
  return cfg;
}

struct SynthArgs {
  std::string out;
  int dof = 3;
  std::string branching = "serial";
  int frames = 10;
  int points = 5000;
  int sequences = 1;
  double point_sigma = 0.002;
  double global_sigma = 0.002;
  double max_step = 0.12;
  int occlusion = 0;
  std::uint64_t seed = 0;
};

int cmd_synthgen(const SynthArgs& a) {
  kf::Branching branching = kf::Branching::Serial;
  if (a.branching == "star") branching = kf::Branching::Star;
  if (a.branching == "mixed") branching = kf::Branching::Mixed;

  const kf::RobotSpec spec = kf::random_chain(a.dof, branching, a.seed);
  kf::Rng material_rng(kf::derive_seed(a.seed, "material"));
  const std::vector<kf::PointCloud> material =
      kf::sample_material_points(spec, a.points, material_rng);

  const fs::path out(a.out);
  fs::create_directories(out);
  std::ofstream manifest(out / "sequences.txt");
  if (!manifest) {
    throw kf::Error(kf::ErrorCode::IoError,
                    "cannot write " + (out / "sequences.txt").string());
  }
  for (int s = 0; s < a.sequences; ++s) {
    kf::Rng traj_rng(kf::derive_seed(a.seed, "trajectory", s));
    const auto trajectory =
        kf::random_trajectory(spec, a.frames, traj_rng, a.max_step);
    kf::GroundTruth gt;
    kf::Rng render_rng(kf::derive_seed(a.seed, "render", s));
    kf::FrameSequence seq =
        kf::render_sequence(spec, material, trajectory, a.point_sigma,
                            a.global_sigma, render_rng, s == 0 ? &gt : nullptr);
    kf::apply_occlusion(seq, s == 0 ? &gt : nullptr, a.occlusion,
                        kf::derive_seed(a.seed, "occlusion", s));
    const std::string dir = "seq_" + std::to_string(s);
    kf::write_sequence(out / dir, seq.frames);
    manifest << dir << "\n";
    // Ground truth is recorded for the first sequence; all sequences share
    // the robot and its rest configuration, only the motion differs.
    if (s == 0) kf::save_ground_truth(out / "ground_truth.json", gt);
  }
  std::printf("synthgen: %d-dof %s robot, %zu links, %d sequence(s) -> %s\n",
              spec.dof(), a.branching.c_str(), spec.links.size(), a.sequences,
              a.out.c_str());
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& truth,
             const kf::EvalOptions& opt) {
  const kf::EvalReport report = kf::evaluate_bundle(pred, truth, opt);
  const auto row = [](const char* label, const std::optional<double>& value,
                      const char* unit) {
    if (value.has_value()) {
      std::printf("%-22s %12.4f %s\n", label, *value, unit);
    } else {
      std::printf("%-22s %12s\n", label, "absent");
    }
  };
  std::printf("%-22s %12s\n", "metric", "value");
  row("chamfer", report.cd_mm, "mm");
  row("tree edit distance", report.ted, "");
  row("joint axis angle", report.e_ja_deg, "deg");
  row("joint axis distance", report.e_jd_mm, "mm");
  row("repose chamfer", report.cd_r_mm, "mm");
  return 0;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const kf::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == kf::ErrorCode::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robot description reconstruction from point cloud sequences"};
  app.require_subcommand(1);
  const std::uint64_t seed_fallback = default_seed();

  SynthArgs sa;
  sa.seed = seed_fallback;
  CLI::App* synth = app.add_subcommand(
      "synthgen", "Generate a synthetic scan with ground truth");
  synth->set_config("--config", "", "Read options from a key = value file");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--dof", sa.dof, "Number of joints (1-18)")
      ->capture_default_str();
  synth->add_option("--branching", sa.branching, "Tree layout")
      ->check(CLI::IsMember({"serial", "star", "mixed"}))
      ->capture_default_str();
  synth->add_option("--frames", sa.frames, "Frames per sequence")
      ->capture_default_str();
  synth->add_option("--points", sa.points, "Surface points per frame")
      ->capture_default_str();
  synth->add_option("--sequences", sa.sequences,
                    "Independent motions of the same robot")
      ->capture_default_str();
  synth->add_option("--point-sigma", sa.point_sigma,
                    "Per-point Gaussian noise, meters")
      ->capture_default_str();
  synth->add_option("--global-sigma", sa.global_sigma,
                    "Per-frame rigid translation jitter, meters")
      ->capture_default_str();
  synth->add_option("--max-step", sa.max_step,
                    "Largest per-frame joint angle change, radians")
      ->capture_default_str();
  synth->add_option("--occlusion", sa.occlusion,
                    "View directions for visibility filtering (0: none)")
      ->capture_default_str();
  synth->add_option("--seed", sa.seed, "Deterministic generation seed")
      ->capture_default_str();

  PipelineArgs ra;
  ra.cfg.seed = seed_fallback;
  CLI::App* reg = app.add_subcommand(
      "register", "Register clusters across frames (first stage only)");
  add_pipeline_options(reg, ra);

  PipelineArgs ga;
  ga.cfg.seed = seed_fallback;
  CLI::App* seg = app.add_subcommand(
      "segment", "Group clusters into rigid parts (needs a saved registration)");
  add_pipeline_options(seg, ga);

  PipelineArgs ba;
  ba.cfg.seed = seed_fallback;
  CLI::App* build = app.add_subcommand(
      "build", "Run the full pipeline and write a URDF bundle");
  add_pipeline_options(build, ba);
  build
      ->add_option("--from-stage", ba.from_stage,
                   "Resume from a stage, reusing earlier artifacts: "
                   "register|segment|topology|joints|mesh|urdf")
      ->capture_default_str();

  std::string eval_pred;
  std::string eval_truth;
  kf::EvalOptions eval_opt;
  eval_opt.seed = seed_fallback;
  CLI::App* eval = app.add_subcommand(
      "eval", "Score a bundle against ground truth");
  eval->set_config("--config", "", "Read options from a key = value file");
  eval->add_option("--pred", eval_pred, "Bundle directory to score")
      ->required();
  eval->add_option("--truth", eval_truth, "Ground truth JSON file")
      ->required();
  eval->add_option("--trials", eval_opt.repose_trials,
                   "Random configurations for the repose metric")
      ->capture_default_str();
  eval->add_option("--points", eval_opt.repose_points,
                   "Surface samples per repose trial")
      ->capture_default_str();
  eval->add_option("--seed", eval_opt.seed, "Evaluation seed")
      ->capture_default_str();

  std::string plot_report;
  CLI::App* plot = app.add_subcommand(
      "plot", "Export correlation matrix and silhouette curve as CSV");
  plot->add_option("--report", plot_report, "Bundle report directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (app.got_subcommand(synth)) {
    return run_guarded([&] { return cmd_synthgen(sa); });
  }
  if (app.got_subcommand(reg)) {
    return run_guarded([&] {
      kf::run_pipeline(make_config(ra), kf::Stage::Register,
                       kf::Stage::Register);
      return 0;
    });
  }
  if (app.got_subcommand(seg)) {
    return run_guarded([&] {
      kf::run_pipeline(make_config(ga), kf::Stage::Segment, kf::Stage::Segment);
      return 0;
    });
  }
  if (app.got_subcommand(build)) {
    return run_guarded([&] {
      const fs::path bundle =
          kf::run_pipeline(make_config(ba), kf::parse_stage(ba.from_stage),
                           kf::Stage::Urdf);
      std::printf("build: bundle at %s\n", bundle.string().c_str());
      return 0;
    });
  }
  if (app.got_subcommand(eval)) {
    return run_guarded([&] { return cmd_eval(eval_pred, eval_truth, eval_opt); });
  }
  if (app.got_subcommand(plot)) {
    return run_guarded([&] {
      kf::export_plots(plot_report);
      return 0;
    });
  }
  return 2;
}
