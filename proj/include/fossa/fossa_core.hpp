#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fossa/inverse.hpp"

namespace fossa {

enum class HvpMode { finite_difference, exact_quadratic };

// How (H + mu I) v is evaluated around theta*.
struct HvpConfig {
  double fd_step_scale = 1e-4;  // epsilon_0; actual step is epsilon_0 / ||v||
  double damping = 1e-4;        // mu
  HvpMode mode = HvpMode::finite_difference;

  void validate() const {
    if (!(fd_step_scale > 0.0)) throw ConfigError("HvpConfig: fd_step_scale must be > 0");
    if (!(damping >= 0.0)) throw ConfigError("HvpConfig: damping must be >= 0");
  }
};

struct CgConfig {
  double rel_tol = 1e-3;    // rho_tol
  int max_iters = 500;
  double abs_floor = 1e-8;  // rho_min, the practical residual floor (used by Stage 2)

  void validate() const {
    if (!(abs_floor > 0.0 && abs_floor < rel_tol && rel_tol < 1.0))
      throw ConfigError("CgConfig: need 0 < abs_floor < rel_tol < 1");
    if (max_iters < 1) throw ConfigError("CgConfig: max_iters must be >= 1");
  }
};

enum class CgStatus { converged, max_iterations, zero_rhs, aborted };

struct CgReport {
  int iterations = 0;
  double r_rel = 0.0;  // true residual recomputed at exit, not the recurrence value
  bool converged = false;
  CgStatus status = CgStatus::converged;
  Eigen::VectorXd solution;
};

// Per-sensor raw importance plus everything Stage 2 needs.
struct ImportanceScores {
  Eigen::VectorXd S;            // |grad_E . v_i|; NaN if the solve aborted
  Eigen::VectorXd sensor_loss;  // l_i
  Eigen::VectorXd grad_norm;    // ||grad l_i||
  std::vector<CgReport> cg;     // one per sensor
  double damping = 0.0;         // mu used in the solves
  double objective_grad_norm = 0.0;  // ||grad L(theta*)||, the optimality certificate
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// E = ||y - R u_hat(theta)||^2 over all body nodes and frames.
double error_metric(const FieldModel& model, const ParamVector& theta,
                    const InverseProblem& problem);
Eigen::VectorXd error_metric_gradient(const FieldModel& model, const ParamVector& theta,
                                      const InverseProblem& problem);

// (H + mu I) v around a fixed theta*, where H is the Hessian of grad_fn's
// potential. finite_difference: central differences of the gradient with
// step epsilon_0/||v||. exact_quadratic: the dense Hessian is assembled
// once from unit-direction gradient differences (exact when residuals are
// affine in theta, as for LinearFieldModel problems) and symmetrized.
class HvpOperator {
public:
  HvpOperator(GradientFn grad_fn, Eigen::VectorXd theta_star, HvpConfig cfg);

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd operator()(const Eigen::VectorXd& v) const { return apply(v); }
  const Eigen::MatrixXd& dense_hessian() const;  // exact_quadratic mode only

private:
  GradientFn grad_fn_;
  Eigen::VectorXd theta_;
  HvpConfig cfg_;
  Eigen::MatrixXd dense_;  // built eagerly in exact_quadratic mode
};

// Spec-level convenience: one damped Hessian-vector product of the full
// weighted training objective.
Eigen::VectorXd hvp(const FieldModel& model, const ParamVector& theta_star,
                    const InverseProblem& problem, const SensorWeights& w,
                    const LossWeights& lw, const CollocationSet& coll,
                    const Eigen::VectorXd& v, const HvpConfig& cfg);

// Conjugate gradients on an SPD operator. b = 0 returns the zero solution
// with status zero_rhs. The reported r_rel is recomputed from scratch at
// exit; converged is r_rel <= rel_tol. Non-finite iterates abort with
// status CgStatus::aborted (no throw; callers decide).
CgReport cg_solve(const LinearOperator& A, const Eigen::VectorXd& b, const CgConfig& cfg);

// Stage 1: solve (H + mu I) v_i = grad l_i per sensor and score
// S_i = |grad E . v_i|. Sensors whose solve aborts get S_i = NaN rather
// than being dropped. `optimality_tol` > 0 enforces the first-order
// certificate ||grad L(theta*)|| <= optimality_tol before any solve.
ImportanceScores importance_scores(const FieldModel& model, const ParamVector& theta_star,
                                   const InverseProblem& problem, const SensorWeights& w,
                                   const LossWeights& lw, const CollocationSet& coll,
                                   const HvpConfig& hvp_cfg, const CgConfig& cg_cfg,
                                   int threads = 1, double optimality_tol = 0.0);

// Verification mode: one solve (H + mu I) g = grad E, then S_i = |g . grad l_i|.
// Cross-check only; the per-sensor solves are the primary path because
// Stage 2 consumes per-sensor residuals.
Eigen::VectorXd importance_scores_adjoint(const FieldModel& model,
                                          const ParamVector& theta_star,
                                          const InverseProblem& problem,
                                          const SensorWeights& w, const LossWeights& lw,
                                          const CollocationSet& coll,
                                          const HvpConfig& hvp_cfg, const CgConfig& cg_cfg);

// S from precomputed pieces; importance_scores delegates here.
Eigen::VectorXd scores_from_solves(const Eigen::VectorXd& grad_E,
                                   const std::vector<CgReport>& solves);

}  // namespace fossa
