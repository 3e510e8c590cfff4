#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fossa/fossa_confidence.hpp"
#include "fossa/fossa_core.hpp"
#include "fossa/fossa_impute.hpp"
#include "fossa/inverse.hpp"
#include "fossa/selection_eval.hpp"

#include <nlohmann/json_fwd.hpp>

namespace fossa {

// Benchmark geometry: concentric spheres by default, or explicit inline
// meshes (the analytic oracle configs use degenerate meshes with no
// triangles).
struct GeometryConfig {
  std::string mode = "spheres";  // "spheres" | "explicit"
  int heart_nodes = 64;
  int body_nodes = 96;
  double heart_radius = 1.0;
  double body_radius = 2.0;
  double kernel_scale = 1.0;
  std::optional<SurfaceMesh> heart_mesh;           // explicit mode
  std::optional<SurfaceMesh> body_mesh;            // explicit mode
  std::optional<Eigen::MatrixXd> transfer;         // explicit R override
};

struct SimConfig {
  double dt = 0.05;
  int n_steps = 600;
  int record_stride = 25;
  std::vector<int> stimulus_nodes{0};
};

// Measurements: simulated AP ground truth through R plus noise, or an
// explicit y table.
struct DataConfig {
  std::string mode = "simulate";  // "simulate" | "explicit"
  double sigma = 0.01;
  std::uint64_t noise_seed = 101;
  std::optional<Eigen::MatrixXd> y;        // explicit mode
  std::optional<Eigen::VectorXd> times;    // explicit mode
};

struct ModelConfig {
  std::string type = "mlp";  // "mlp" | "linear"
  std::vector<int> hidden{24, 24};
  std::uint64_t init_seed = 7;
  // linear model:
  std::vector<std::vector<Monomial>> u_basis;
  std::vector<std::vector<Monomial>> v_basis;
  std::optional<Eigen::VectorXd> theta0;  // explicit start (default zeros for linear)
};

struct CollocationConfig {
  int count = 384;
  std::uint64_t seed = 11;
  std::optional<double> t_lo;  // default: first frame time
  std::optional<double> t_hi;  // default: last frame time
};

struct ExperimentConfig {
  std::string mode = "rank-split";  // "rank-split" | "sweep"
  double sigma = 0.01;
  int k = 0;                        // rank-split budget; 0 = 60% of N_b
  std::vector<int> budgets;         // sweep; empty = proportional default grid
  std::vector<std::string> strategies{"fossa_topk", "random"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  TrainConfig retrain;              // warm-start retrains per selected set
};

struct RunConfig {
  std::string out_dir = "fossa_out";
  int threads = 0;               // 0: FOSSA_THREADS env, then hardware
  std::string timing = "wall";   // "wall" | "off" (off writes 0.0; reproducible CSVs)
  std::uint64_t master_seed = 0; // nonzero: rederives all stage seeds

  GeometryConfig geometry;
  APParams ap;
  SimConfig sim;
  DataConfig data;
  ModelConfig model;
  CollocationConfig collocation;
  std::optional<Eigen::VectorXd> sensor_weights;  // default all ones
  LossWeights loss_weights;
  TrainConfig train{1e-2, 2000, 0.0, 0};
  HvpConfig hvp;
  CgConfig cg;
  ConfidenceParams confidence;
  ImputationConfig impute;
  std::vector<SelectionSpec> selections;
  ExperimentConfig experiment;

  void validate() const;  // ConfigError with field-level messages
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Full config with every default materialized; reruns need no access to
// the binary's default table.
nlohmann::json materialize(const RunConfig& cfg);

// FNV-1a over the canonical (sorted-key) materialized JSON.
std::string config_hash(const RunConfig& cfg);

// Deterministic per-purpose seed derivation from an experiment seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace fossa
