#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "doctest.h"
#include "kinemaforge/error.hpp"
#include "kinemaforge/metrics.hpp"
#include "kinemaforge/pipeline.hpp"
#include "kinemaforge/pointcloud.hpp"
#include "kinemaforge/synthgen.hpp"
#include "kinemaforge/urdf.hpp"
#include "test_support.hpp"

using namespace kf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Raw per-cluster pose optimization: orders of magnitude faster than the
// network path and plenty for a noiseless toy arm.
RegressorConfig fast_regressor() {
  RegressorConfig reg;
  reg.direct = true;
  reg.max_iters = 400;
  reg.patience = 60;
  return reg;
}

template <typename Fn>
void expect_code(Fn&& fn, ErrorCode code) {
  try {
    fn();
    FAIL_CHECK("expected a failure");
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("stage names round trip") {
  for (Stage s : {Stage::Register, Stage::Segment, Stage::Topology,
                  Stage::Joints, Stage::Mesh, Stage::Urdf}) {
    CHECK(parse_stage(stage_name(s)) == s);
  }
  expect_code([] { parse_stage("polish"); }, ErrorCode::InvalidConfig);
}

TEST_CASE("configuration rejections") {
  kftest::TempDir tmp("pipelinecfg");

  PipelineConfig empty;
  empty.out = tmp.path / "out";
  expect_code([&] { run_pipeline(empty); }, ErrorCode::InvalidConfig);

  Rng rng(5);
  RobotSpec spec = random_chain(1, Branching::Serial, 21);
  auto material = sample_material_points(spec, 200, rng);
  auto traj = random_trajectory(spec, 3, rng);
  FrameSequence seq = render_sequence(spec, material, traj, 0.0, 0.0, rng);
  write_sequence(tmp.path / "seq", seq.frames);

  PipelineConfig cfg;
  cfg.sequences = {tmp.path / "seq"};
  cfg.out = tmp.path / "out";
  cfg.regressor = fast_regressor();
  expect_code([&] { run_pipeline(cfg, Stage::Urdf, Stage::Register); },
              ErrorCode::InvalidConfig);

  PipelineConfig unnamed = cfg;
  unnamed.name = "";
  expect_code([&] { run_pipeline(unnamed); }, ErrorCode::InvalidConfig);

  // A single captured frame carries no motion to register.
  write_sequence(tmp.path / "short", {seq.frames[0]});
  PipelineConfig one = cfg;
  one.sequences = {tmp.path / "short"};
  expect_code([&] { run_pipeline(one); }, ErrorCode::EmptySequence);
}

TEST_CASE("sequences must share the rest configuration") {
  kftest::TempDir tmp("pipelinealign");
  Rng rng(9);
  RobotSpec spec = random_chain(1, Branching::Serial, 33);
  auto material = sample_material_points(spec, 150, rng);
  auto traj = random_trajectory(spec, 3, rng);
  FrameSequence seq = render_sequence(spec, material, traj, 0.0, 0.0, rng);
  write_sequence(tmp.path / "seq0", seq.frames);

  std::vector<PointCloud> shifted = seq.frames;
  for (auto& frame : shifted) {
    for (auto& p : frame.pts) p += Eigen::Vector3d(5.0, 0.0, 0.0);
  }
  write_sequence(tmp.path / "seq1", shifted);

  PipelineConfig cfg;
  cfg.sequences = {tmp.path / "seq0", tmp.path / "seq1"};
  cfg.out = tmp.path / "out";
  cfg.regressor = fast_regressor();
  expect_code([&] { run_pipeline(cfg); }, ErrorCode::AlignmentError);
}

TEST_CASE("end to end on a small arm") {
  kftest::TempDir tmp("pipelinee2e");
  Rng rng(derive_seed(41, "pipeline-test", 13));
  RobotSpec spec = random_chain(2, Branching::Serial, 13);
  auto material = sample_material_points(spec, 2000, rng);
  auto traj = random_trajectory(spec, 8, rng);
  GroundTruth gt;
  FrameSequence seq = render_sequence(spec, material, traj, 0.0, 0.0, rng, &gt);
  write_sequence(tmp.path / "seq0", seq.frames);
  save_ground_truth(tmp.path / "truth.json", gt);

  PipelineConfig cfg;
  cfg.sequences = {tmp.path / "seq0"};
  cfg.out = tmp.path / "out";
  cfg.name = "toy";
  cfg.clusters = 12;
  cfg.regressor = fast_regressor();
  cfg.meshing.resolution = 24;
  cfg.seed = 7;

  fs::path bundle = run_pipeline(cfg);
  CHECK(bundle == cfg.out / "toy");
  for (const char* rel :
       {"report/track.json", "report/segmentation_report.json",
        "report/topology.json", "report/joints.json", "model.urdf"}) {
    CHECK(fs::exists(bundle / rel));
  }

  UrdfModel model = load_urdf(bundle / "model.urdf");
  REQUIRE(model.links.size() == 3);
  CHECK(model.joints.size() == 2);
  for (const auto& link : model.links) {
    REQUIRE(link.has_geometry);
    CHECK(fs::exists(bundle / link.mesh_filename));
  }
  CHECK(tree_edit_distance(tree_shape(model), tree_from_parents({-1, 0, 1})) ==
        0);

  EvalOptions opt;
  opt.repose_trials = 2;
  opt.repose_points = 1500;
  opt.seed = 1;
  EvalReport eval = evaluate_bundle(bundle, tmp.path / "truth.json", opt);
  REQUIRE(eval.cd_mm.has_value());
  REQUIRE(eval.ted.has_value());
  REQUIRE(eval.e_ja_deg.has_value());
  REQUIRE(eval.e_jd_mm.has_value());
  REQUIRE(eval.cd_r_mm.has_value());
  CHECK(*eval.ted == 0.0);
  // Sanity bounds for a noiseless toy; the acceptance runs pin these tight.
  CHECK(*eval.cd_mm < 30.0);
  CHECK(*eval.e_ja_deg < 10.0);
  CHECK(*eval.e_jd_mm < 25.0);
  CHECK(*eval.cd_r_mm < 80.0);
  EvalReport reread = load_eval_report(bundle / "eval_report.json");
  CHECK(reread.cd_mm == eval.cd_mm);
  CHECK(reread.ted == eval.ted);
  CHECK(reread.cd_r_mm == eval.cd_r_mm);

  export_plots(bundle / "report");
  std::string corr_csv = slurp(bundle / "report" / "correlation.csv");
  CHECK(std::count(corr_csv.begin(), corr_csv.end(), '\n') == 12);
  std::string sil_csv = slurp(bundle / "report" / "silhouette.csv");
  CHECK(sil_csv.rfind("k,silhouette\n", 0) == 0);
  CHECK(std::count(sil_csv.begin(), sil_csv.end(), '\n') == 8);  // header + k 2..8

  // Re-running the tail from saved artifacts reproduces the same robot
  // description byte for byte.
  std::string first = slurp(bundle / "model.urdf");
  run_pipeline(cfg, Stage::Topology, Stage::Urdf);
  CHECK(slurp(bundle / "model.urdf") == first);

  // So does a fresh full run with the same seed into a different directory.
  PipelineConfig again = cfg;
  again.out = tmp.path / "out2";
  fs::path second = run_pipeline(again);
  CHECK(slurp(second / "model.urdf") == first);
}

}  // TEST_SUITE
