#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fossa/config.hpp"
#include "fossa/fossa_confidence.hpp"
#include "fossa/fossa_core.hpp"
#include "fossa/fossa_impute.hpp"
#include "fossa/selection_eval.hpp"

namespace fossa {

// In-memory benchmark dataset: geometry, ground truth, clean measurements.
// Noise is applied per consumer (experiments re-noise per seed).
struct BenchmarkData {
  SurfaceMesh heart, body;
  WeightedGraph heart_graph, body_graph;
  TransferMatrix R;
  FieldTimeSeries truth;      // simulate mode; explicit mode leaves u/v empty
  MeasurementSet clean;       // R * truth (or the explicit y)
  bool has_truth = false;
};

BenchmarkData build_benchmark(const RunConfig& cfg);

// Full-sensor inverse problem over the benchmark with the given
// measurements.
InverseProblem make_problem(const BenchmarkData& bench, const Eigen::MatrixXd& y,
                            const Eigen::VectorXd& times, const APParams& ap);

// Model + starting parameters per config. MLP scaling bounds come from the
// heart bounding box and the frame time range.
struct ModelBundle {
  std::unique_ptr<FieldModel> model;
  ParamVector theta0;
  std::uint64_t init_seed = 0;
};
ModelBundle build_model(const RunConfig& cfg, const InverseProblem& problem,
                        std::uint64_t init_seed_override = 0);

CollocationSet build_collocation(const RunConfig& cfg, const InverseProblem& problem,
                                 std::uint64_t seed_override = 0);

// Predictions over an (N_h x N_t) grid as a FieldTimeSeries.
FieldTimeSeries predict_fields(const FieldModel& model, const ParamVector& theta,
                               const InverseProblem& problem);

// ---------------------------------------------------------------------------
// scores.csv: Stage 1 columns, optionally extended by Stage 2/3 columns.

struct ScoresTable {
  // Stage 1
  Eigen::VectorXd S_raw, l_i, grad_norm;
  Eigen::VectorXd cg_iters;  // stored as doubles for uniform CSV handling
  Eigen::VectorXd cg_rrel;
  std::vector<bool> cg_converged;
  // Stage 2 (present when has_confidence)
  bool has_confidence = false;
  Eigen::VectorXd C_S, C_G, C, s, z;
  // Stage 3 (present when has_imputation)
  bool has_imputation = false;
  Eigen::VectorXd S_tilde;
  std::vector<bool> trusted;

  int sensor_count() const { return static_cast<int>(S_raw.size()); }
};

void save_scores_csv(const ScoresTable& table, const std::string& path,
                     const std::vector<std::string>& provenance);
ScoresTable load_scores_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Stage functions (file-level pipeline steps used by the CLI).

// Writes meshes, transfer matrix, ground truth, measurements, and a
// manifest with per-file checksums into out_dir.
void stage_generate(const RunConfig& cfg, const std::string& out_dir);

// Loads a generated dataset directory back into memory.
BenchmarkData load_dataset(const std::string& dir);

struct TrainOutcome {
  TrainReport report;
  std::string checkpoint_path;
};
// Trains on the dataset in data_dir (optionally restricted to a sensor
// subset file) and writes checkpoint + train_report.json.
TrainOutcome stage_train(const RunConfig& cfg, const std::string& data_dir,
                         const std::string& out_checkpoint,
                         const std::optional<std::vector<int>>& sensors = std::nullopt);

// Stage 1 + Stage 2: importance scores with CG diagnostics and confidence
// columns; writes scores.csv (+ scores_meta.json sidecar).
void stage_score(const RunConfig& cfg, const std::string& checkpoint,
                 const std::string& data_dir, const std::string& out_scores);

// Stage 3: reads scores.csv (needs confidence columns), partitions by tau,
// imputes on the body mesh graph, appends S_tilde + trusted columns.
void stage_impute(const RunConfig& cfg, const std::string& scores_csv,
                  const std::string& body_mesh_json);

// Applies one selection spec; needs scores for rank strategies and the
// body mesh for maximin. Returns ascending sensor indices.
std::vector<int> stage_select(const RunConfig& cfg, const SelectionSpec& spec,
                              const std::optional<ScoresTable>& scores,
                              const WeightedGraph& body_graph);

void save_selection_csv(const std::vector<int>& sensors, const std::string& path,
                        const std::vector<std::string>& provenance);
std::vector<int> load_selection_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Experiments (selection_eval module drivers).

struct ExperimentRow {
  std::string strategy;
  int budget = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double re = 0.0;
  double wall_seconds = 0.0;
};

// Rank-split: per seed, train the full-sensor PINN, score, refine, impute,
// then retrain on high/middle/low rank bands and measure RE against the
// ground truth. Returns one ExperimentResult per band.
std::vector<ExperimentResult> run_rank_split(const RunConfig& cfg,
                                             std::vector<ExperimentRow>* rows = nullptr);

// Budget sweep over strategies; paired seeds share data, noise, and the
// full-model scoring so RE differences are attributable to selection.
std::vector<ExperimentResult> run_budget_sweep(const RunConfig& cfg,
                                               std::vector<ExperimentRow>* rows = nullptr);

void save_results_csv(const std::vector<ExperimentRow>& rows, const std::string& path,
                      const std::vector<std::string>& provenance);

// ---------------------------------------------------------------------------
// Orchestration.

struct PipelineOptions {
  bool resume = false;
  bool dry_run = false;
};

// generate -> train -> score -> impute -> select -> evaluate, all under
// cfg.out_dir. Stages already on disk are reused when resume is set and the
// stored config hash matches.
void cmd_pipeline(const RunConfig& cfg, const PipelineOptions& opts);

// FNV-1a 64 over a file's bytes, hex string.
std::string file_checksum(const std::string& path);

std::vector<std::string> provenance_lines(const RunConfig& cfg, std::uint64_t seed);

}  // namespace fossa
