#include "fossa/fossa_core.hpp"

#include <cmath>
#include <limits>

#include "fossa/parallel.hpp"

namespace fossa {

double error_metric(const FieldModel& model, const ParamVector& theta,
                    const InverseProblem& problem) {
  // E is exactly the unweighted data-loss sum over all sensors.
  return all_sensor_losses(model, theta, problem).sum();
}

Eigen::VectorXd error_metric_gradient(const FieldModel& model, const ParamVector& theta,
                                      const InverseProblem& problem) {
  // grad E = gradient of the unweighted data sum; no physics term.
  Eigen::VectorXd grad;
  total_loss_grad(model, theta, problem, SensorWeights::ones(problem.body_count()),
                  LossWeights{1.0, 0.0}, CollocationSet{}, grad);
  return grad;
}

HvpOperator::HvpOperator(GradientFn grad_fn, Eigen::VectorXd theta_star, HvpConfig cfg)
    : grad_fn_(std::move(grad_fn)), theta_(std::move(theta_star)), cfg_(cfg) {
  cfg_.validate();
  if (cfg_.mode == HvpMode::exact_quadratic) {
    const int n = static_cast<int>(theta_.size());
    dense_.resize(n, n);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd lo = theta_, hi = theta_;
      hi[j] += 1.0;
      lo[j] -= 1.0;
      dense_.col(j) = 0.5 * (grad_fn_(hi) - grad_fn_(lo));
    }
    dense_ = 0.5 * (dense_ + dense_.transpose()).eval();  // kill round-off asymmetry
    if (!dense_.allFinite())
      throw NumericalError("HvpOperator: non-finite dense Hessian assembly");
  }
}

const Eigen::MatrixXd& HvpOperator::dense_hessian() const {
  if (cfg_.mode != HvpMode::exact_quadratic)
    throw ConfigError("HvpOperator: dense Hessian only available in exact_quadratic mode");
  return dense_;
}

Eigen::VectorXd HvpOperator::apply(const Eigen::VectorXd& v) const {
  if (v.size() != theta_.size())
    throw ConfigError("HvpOperator: direction length does not match parameter count");
  const double vnorm = v.norm();
  if (vnorm == 0.0) return Eigen::VectorXd::Zero(v.size());
  if (cfg_.mode == HvpMode::exact_quadratic) return dense_ * v + cfg_.damping * v;
  const double eps = cfg_.fd_step_scale / vnorm;
  const Eigen::VectorXd g_hi = grad_fn_(theta_ + eps * v);
  const Eigen::VectorXd g_lo = grad_fn_(theta_ - eps * v);
  if (!g_hi.allFinite() || !g_lo.allFinite())
    throw NumericalError("hvp: non-finite gradient at perturbed point");
  return (g_hi - g_lo) / (2.0 * eps) + cfg_.damping * v;
}

Eigen::VectorXd hvp(const FieldModel& model, const ParamVector& theta_star,
                    const InverseProblem& problem, const SensorWeights& w,
                    const LossWeights& lw, const CollocationSet& coll,
                    const Eigen::VectorXd& v, const HvpConfig& cfg) {
  if (!(v.norm() > 0.0)) throw ConfigError("hvp: direction must be nonzero");
  GradientFn grad_fn = [&](const Eigen::VectorXd& th) {
    ParamVector p{th};
    Eigen::VectorXd g;
    total_loss_grad(model, p, problem, w, lw, coll, g);
    return g;
  };
  HvpOperator op(std::move(grad_fn), theta_star.values, cfg);
  return op.apply(v);
}

CgReport cg_solve(const LinearOperator& A, const Eigen::VectorXd& b, const CgConfig& cfg) {
  cfg.validate();
  CgReport report;
  const double bnorm = b.norm();
  if (!std::isfinite(bnorm)) {
    report.status = CgStatus::aborted;
    report.converged = false;
    report.r_rel = std::numeric_limits<double>::quiet_NaN();
    report.solution = Eigen::VectorXd::Zero(b.size());
    return report;
  }
  if (bnorm == 0.0) {
    report.status = CgStatus::zero_rhs;
    report.converged = true;
    report.r_rel = 0.0;
    report.solution = Eigen::VectorXd::Zero(b.size());
    return report;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  int k = 0;
  bool aborted = false;
  while (k < cfg.max_iters) {
    const Eigen::VectorXd Ap = A(p);
    const double pAp = p.dot(Ap);
    if (!std::isfinite(pAp) || pAp <= 0.0) {
      // Damped operators are SPD; a nonpositive curvature direction means
      // the product itself broke down.
      aborted = true;
      break;
    }
    const double alpha = rr / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    ++k;
    const double rr_new = r.squaredNorm();
    if (!std::isfinite(rr_new)) {
      aborted = true;
      break;
    }
    if (std::sqrt(rr_new) / bnorm <= cfg.rel_tol) {
      rr = rr_new;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }

  report.iterations = k;
  report.solution = std::move(x);
  if (aborted || !report.solution.allFinite()) {
    report.status = CgStatus::aborted;
    report.converged = false;
    report.r_rel = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  // True residual, recomputed from scratch; the recurrence value drifts.
  const Eigen::VectorXd r_true = b - A(report.solution);
  report.r_rel = r_true.norm() / bnorm;
  report.converged = report.r_rel <= cfg.rel_tol;
  report.status = report.converged ? CgStatus::converged : CgStatus::max_iterations;
  return report;
}

Eigen::VectorXd scores_from_solves(const Eigen::VectorXd& grad_E,
                                   const std::vector<CgReport>& solves) {
  Eigen::VectorXd S(static_cast<Eigen::Index>(solves.size()));
  for (std::size_t i = 0; i < solves.size(); ++i) {
    if (solves[i].status == CgStatus::aborted)
      S[i] = std::numeric_limits<double>::quiet_NaN();
    else
      S[i] = std::abs(grad_E.dot(solves[i].solution));
  }
  return S;
}

ImportanceScores importance_scores(const FieldModel& model, const ParamVector& theta_star,
                                   const InverseProblem& problem, const SensorWeights& w,
                                   const LossWeights& lw, const CollocationSet& coll,
                                   const HvpConfig& hvp_cfg, const CgConfig& cg_cfg,
                                   int threads, double optimality_tol) {
  hvp_cfg.validate();
  cg_cfg.validate();
  problem.validate();
  const int nb = problem.body_count();

  GradientFn grad_fn = [&](const Eigen::VectorXd& th) {
    ParamVector p{th};
    Eigen::VectorXd g;
    total_loss_grad(model, p, problem, w, lw, coll, g);
    return g;
  };

  ImportanceScores out;
  out.damping = hvp_cfg.damping;
  out.objective_grad_norm = grad_fn(theta_star.values).norm();
  if (optimality_tol > 0.0 && out.objective_grad_norm > optimality_tol)
    throw NumericalError("importance_scores: optimality certificate failed: ||grad L|| = " +
                         std::to_string(out.objective_grad_norm) + " > " +
                         std::to_string(optimality_tol));

  out.sensor_loss = all_sensor_losses(model, theta_star, problem);
  std::vector<Eigen::VectorXd> rhs(nb);
  out.grad_norm.resize(nb);
  for (int i = 0; i < nb; ++i) {
    rhs[i] = sensor_loss_gradient(model, theta_star, problem, i);
    out.grad_norm[i] = rhs[i].norm();
  }

  const Eigen::VectorXd grad_E = error_metric_gradient(model, theta_star, problem);
  const HvpOperator op(grad_fn, theta_star.values, hvp_cfg);
  LinearOperator apply = [&op](const Eigen::VectorXd& v) { return op.apply(v); };

  out.cg.resize(nb);
  // Solves are independent given the frozen operator; slot-per-sensor writes
  // keep results schedule-independent.
  parallel_for(nb, std::max(threads, 1), [&](int i) {
    out.cg[i] = cg_solve(apply, rhs[i], cg_cfg);
  });
  out.S = scores_from_solves(grad_E, out.cg);
  return out;
}

Eigen::VectorXd importance_scores_adjoint(const FieldModel& model,
                                          const ParamVector& theta_star,
                                          const InverseProblem& problem,
                                          const SensorWeights& w, const LossWeights& lw,
                                          const CollocationSet& coll,
                                          const HvpConfig& hvp_cfg, const CgConfig& cg_cfg) {
  GradientFn grad_fn = [&](const Eigen::VectorXd& th) {
    ParamVector p{th};
    Eigen::VectorXd g;
    total_loss_grad(model, p, problem, w, lw, coll, g);
    return g;
  };
  const HvpOperator op(grad_fn, theta_star.values, hvp_cfg);
  const Eigen::VectorXd grad_E = error_metric_gradient(model, theta_star, problem);
  const CgReport solve = cg_solve([&op](const Eigen::VectorXd& v) { return op.apply(v); },
                                  grad_E, cg_cfg);
  if (solve.status == CgStatus::aborted)
    throw NumericalError("importance_scores_adjoint: CG aborted");
  Eigen::VectorXd S(problem.body_count());
  for (int i = 0; i < problem.body_count(); ++i)
    S[i] = std::abs(solve.solution.dot(sensor_loss_gradient(model, theta_star, problem, i)));
  return S;
}

}  // namespace fossa
