#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fossa/geometry.hpp"
#include "fossa/model.hpp"
#include "fossa/simkit.hpp"

namespace fossa {

// Per-sensor nonnegative weights w_i of the weighted data loss.
struct SensorWeights {
  Eigen::VectorXd w;

  static SensorWeights ones(int n) { return {Eigen::VectorXd::Ones(n)}; }
  void validate() const {
    if ((w.array() < 0.0).any()) throw ConfigError("SensorWeights: weights must be >= 0");
  }
};

// Global loss multipliers: total = lambda_d * sum_i w_i l_i + lambda_p * L_phy.
// (The weighted data sum already carries per-sensor weights; lambda_d is a
// redundant global knob kept so both weighting styles in use can be
// expressed.)
struct LossWeights {
  double lambda_d = 1.0;
  double lambda_p = 1.0;

  void validate() const {
    if (!(lambda_d > 0.0)) throw ConfigError("LossWeights: lambda_d must be > 0");
    if (!(lambda_p >= 0.0)) throw ConfigError("LossWeights: lambda_p must be >= 0");
  }
};

struct CollocationPoint {
  int node = 0;
  double time = 0.0;
};

// Residual sample sites over the cardiac spatiotemporal domain.
struct CollocationSet {
  std::vector<CollocationPoint> points;
  std::uint64_t seed = 0;
};

// Uniform (node, time) sampling, seeded.
CollocationSet sample_collocation(int n_points, int node_count, double t_lo, double t_hi,
                                  std::uint64_t seed);

// The assembled inverse problem: observation operator, measurements, and
// the heart-side domain the field model lives on.
struct InverseProblem {
  TransferMatrix R;
  Eigen::MatrixXd y;             // N_b x N_t measurements used for training
  Eigen::MatrixXd heart_coords;  // 3 x N_h
  Eigen::VectorXd times;         // N_t frame times
  WeightedGraph heart_graph;
  APParams ap;

  int body_count() const { return R.body_count(); }
  int heart_count() const { return static_cast<int>(heart_coords.cols()); }
  int frame_count() const { return static_cast<int>(times.size()); }
  void validate() const;

  // 4 x (N_h * N_t) model-input grid; column t*N_h + j is node j at frame t.
  Eigen::MatrixXd data_inputs() const;
  // Keep rows of R and y for the given (sorted, unique) sensor subset.
  InverseProblem restricted_to(const std::vector<int>& sensors) const;
};

struct TrainConfig {
  double step_size = 1e-2;  // Adam learning rate
  int max_iters = 2000;
  double g_tol = 0.0;  // <= 0: auto, 1e-4 * (1 + |L(theta0)|)
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (!(step_size > 0.0)) throw ConfigError("TrainConfig: step_size must be > 0");
    if (max_iters < 0) throw ConfigError("TrainConfig: max_iters must be >= 0");
  }
};

struct TrainReport {
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  double g_tol_used = 0.0;
  std::vector<double> loss_history;
};

// l_i = sum_t (y_i(t) - [R u_hat(theta)]_i(t))^2.
double sensor_loss(const FieldModel& model, const ParamVector& theta,
                   const InverseProblem& problem, int sensor);
Eigen::VectorXd all_sensor_losses(const FieldModel& model, const ParamVector& theta,
                                  const InverseProblem& problem);

// Mean of (r_u^2 + r_v^2) over collocation points (r_b = 0 on closed
// surfaces; the discrete Laplacian conserves flux, so the zero-flux
// boundary condition holds identically). Empty set gives 0.
double physics_loss(const FieldModel& model, const ParamVector& theta,
                    const WeightedGraph& graph, const APParams& ap,
                    const Eigen::MatrixXd& heart_coords, const CollocationSet& coll);

double total_loss(const FieldModel& model, const ParamVector& theta,
                  const InverseProblem& problem, const SensorWeights& w,
                  const LossWeights& lw, const CollocationSet& coll);

// Value plus reverse-mode gradient of the full weighted objective.
double total_loss_grad(const FieldModel& model, const ParamVector& theta,
                       const InverseProblem& problem, const SensorWeights& w,
                       const LossWeights& lw, const CollocationSet& coll,
                       Eigen::VectorXd& grad);

// d l_i / d theta for one sensor.
Eigen::VectorXd sensor_loss_gradient(const FieldModel& model, const ParamVector& theta,
                                     const InverseProblem& problem, int sensor);

// Full-batch Adam until ||grad|| <= g_tol or max_iters. Deterministic for a
// given start and config. Throws NumericalError (with the loss history in
// the message) if the loss goes non-finite.
std::pair<ParamVector, TrainReport> train(const FieldModel& model, const ParamVector& theta0,
                                          const InverseProblem& problem,
                                          const SensorWeights& w, const LossWeights& lw,
                                          const CollocationSet& coll, const TrainConfig& cfg);

}  // namespace fossa
