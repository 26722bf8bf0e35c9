#pragma once

// Orchestration of the full reconstruction: frame sequences in, URDF bundle
// out, with per-stage artifacts that later runs can resume from.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kinemaforge/meshing.hpp"
#include "kinemaforge/metrics.hpp"
#include "kinemaforge/regressor.hpp"

namespace kf {

enum class Stage { Register, Segment, Topology, Joints, Mesh, Urdf };

Stage parse_stage(const std::string& name);  // throws InvalidConfig
std::string stage_name(Stage stage);

struct PipelineConfig {
  std::vector<std::filesystem::path> sequences;  // one directory per capture
  std::filesystem::path out = "out";
  std::string name = "robot";
  int clusters = 40;
  int k_min = 2;
  int k_max = 8;
  double alpha = 0.0;  // <= 0 selects pi / scene bounding-box diagonal
  bool corr_use_pos = true;
  bool corr_use_ori = true;
  RegressorConfig regressor;
  MeshingConfig meshing;
  std::uint64_t seed = 0;
};

// Runs stages [from, to] of: register -> segment -> topology -> joints ->
// mesh -> urdf.  Stages before `from` are loaded from the bundle's artifacts
// (report/*.json); each executed stage saves its artifact, so any prefix of
// the pipeline can be re-run or resumed.  Multi-sequence inputs must share
// the frame-0 configuration (checked via frame-0 Chamfer distance; throws
// AlignmentError).  Returns the bundle directory out/<name>.
std::filesystem::path run_pipeline(const PipelineConfig& cfg,
                                   Stage from = Stage::Register,
                                   Stage to = Stage::Urdf);

struct EvalOptions {
  int repose_trials = 5;
  int repose_points = 5000;
  std::uint64_t seed = 0;
};

// Scores a finished bundle against the generator's ground truth and writes
// eval_report.json into the bundle.  Metrics whose inputs are unavailable
// (missing raw sequences, no matched joints) are reported as absent, with a
// note on stderr.
EvalReport evaluate_bundle(const std::filesystem::path& bundle,
                           const std::filesystem::path& truth_json,
                           const EvalOptions& opt);

// Writes correlation.csv (the S x S motion-correlation matrix) and
// silhouette.csv (k, score per part-count candidate) next to the
// segmentation report in `report_dir`.
void export_plots(const std::filesystem::path& report_dir);

}  // namespace kf
