#pragma once

#include <Eigen/Dense>

#include "fossa/common.hpp"

namespace fossa {

struct ConfidenceParams {
  double rho_min = 1e-8;        // practical lower bound for achievable residuals
  double rho_tol = 1e-3;        // solver stopping tolerance
  double c_min_solve = 0.2;     // confidence floor for solves that just met tolerance
  double p_solve = 2.0;         // decay shape exponent
  double eta = 1.0;             // gradient-confidence sharpness
  double mad_floor = 1e-12;     // keeps z finite when >50% of s coincide
  double log_floor = 1e-30;     // floor on l_i, ||grad l_i|| before logs

  void validate() const {
    if (!(rho_min > 0.0 && rho_min < rho_tol))
      throw ConfigError("ConfidenceParams: need 0 < rho_min < rho_tol");
    if (!(c_min_solve > 0.0 && c_min_solve < 1.0))
      throw ConfigError("ConfidenceParams: c_min_solve must be in (0,1)");
    if (!(p_solve >= 1.0)) throw ConfigError("ConfidenceParams: p_solve must be >= 1");
    if (!(eta > 0.0)) throw ConfigError("ConfidenceParams: eta must be > 0");
    if (!(mad_floor > 0.0)) throw ConfigError("ConfidenceParams: mad_floor must be > 0");
  }
};

struct ConfidenceScores {
  Eigen::VectorXd C_S;  // solver reliability, in (0,1]
  Eigen::VectorXd C_G;  // gradient-loss consistency, in (0,1]
  Eigen::VectorXd C;    // elementwise product
  Eigen::VectorXd s;    // mismatch scores log||grad l|| - log l
  Eigen::VectorXd z;    // robust standardized deviations of s
};

// C_S from per-sensor CG relative residuals: log-normalize between rho_min
// and rho_tol, clip to [0,1], then c_min + (1-c_min)(1-t)^p. A residual of
// exactly 0 counts as rho_min (perfect solve); non-finite residuals
// (aborted solves) get the floor c_min.
Eigen::VectorXd solve_confidence(const Eigen::VectorXd& r_rel, const ConfidenceParams& p);

// C_G from mismatch scores s_i = log g_i - log l_i standardized by
// median/MAD; only positive deviations are penalized. Fills s and z.
Eigen::VectorXd gradient_confidence(const Eigen::VectorXd& losses,
                                    const Eigen::VectorXd& grad_norms,
                                    const ConfidenceParams& p, Eigen::VectorXd* s_out = nullptr,
                                    Eigen::VectorXd* z_out = nullptr);

Eigen::VectorXd combine_confidence(const Eigen::VectorXd& C_S, const Eigen::VectorXd& C_G);

// All of Stage 2 in one call.
ConfidenceScores confidence_scores(const Eigen::VectorXd& r_rel,
                                   const Eigen::VectorXd& losses,
                                   const Eigen::VectorXd& grad_norms,
                                   const ConfidenceParams& p);

// Robust-statistics helpers (copying; inputs untouched).
double median(Eigen::VectorXd values);
double median_absolute_deviation(const Eigen::VectorXd& values, double center);

}  // namespace fossa
