#include "fossa/fossa_confidence.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fossa {

double median(Eigen::VectorXd values) {
  const Eigen::Index n = values.size();
  if (n == 0) throw ConfigError("median: empty input");
  double* begin = values.data();
  double* end = begin + n;
  double* mid = begin + n / 2;
  std::nth_element(begin, mid, end);
  double med = *mid;
  if (n % 2 == 0) {
    // average with the lower middle
    med = 0.5 * (med + *std::max_element(begin, mid));
  }
  return med;
}

double median_absolute_deviation(const Eigen::VectorXd& values, double center) {
  return median((values.array() - center).abs().matrix());
}

Eigen::VectorXd solve_confidence(const Eigen::VectorXd& r_rel, const ConfidenceParams& p) {
  p.validate();
  const double log_min = std::log(p.rho_min);
  const double log_tol = std::log(p.rho_tol);
  Eigen::VectorXd C_S(r_rel.size());
  for (Eigen::Index i = 0; i < r_rel.size(); ++i) {
    double r = r_rel[i];
    if (!std::isfinite(r)) {
      C_S[i] = p.c_min_solve;  // aborted solve: worst solver confidence
      continue;
    }
    if (r < 0.0) throw ConfigError("solve_confidence: negative residual");
    if (r == 0.0) r = p.rho_min;
    const double t = (std::log(r) - log_min) / (log_tol - log_min);
    const double t_clipped = std::clamp(t, 0.0, 1.0);
    C_S[i] = p.c_min_solve + (1.0 - p.c_min_solve) * std::pow(1.0 - t_clipped, p.p_solve);
  }
  return C_S;
}

Eigen::VectorXd gradient_confidence(const Eigen::VectorXd& losses,
                                    const Eigen::VectorXd& grad_norms,
                                    const ConfidenceParams& p, Eigen::VectorXd* s_out,
                                    Eigen::VectorXd* z_out) {
  p.validate();
  if (losses.size() != grad_norms.size())
    throw ConfigError("gradient_confidence: losses and grad_norms differ in length");
  const Eigen::Index n = losses.size();
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double l = std::max(losses[i], p.log_floor);
    const double g = std::max(grad_norms[i], p.log_floor);
    s[i] = std::log(g) - std::log(l);
  }
  const double s_med = median(s);
  const double mad = std::max(median_absolute_deviation(s, s_med), p.mad_floor);
  Eigen::VectorXd z = (s.array() - s_med).matrix() / (1.4826 * mad);
  Eigen::VectorXd C_G(n);
  for (Eigen::Index i = 0; i < n; ++i)
    C_G[i] = std::exp(-p.eta * std::max(z[i], 0.0));
  if (s_out) *s_out = std::move(s);
  if (z_out) *z_out = std::move(z);
  return C_G;
}

Eigen::VectorXd combine_confidence(const Eigen::VectorXd& C_S, const Eigen::VectorXd& C_G) {
  if (C_S.size() != C_G.size())
    throw ConfigError("combine_confidence: component lengths differ");
  return C_S.cwiseProduct(C_G);
}

ConfidenceScores confidence_scores(const Eigen::VectorXd& r_rel,
                                   const Eigen::VectorXd& losses,
                                   const Eigen::VectorXd& grad_norms,
                                   const ConfidenceParams& p) {
  ConfidenceScores out;
  out.C_S = solve_confidence(r_rel, p);
  out.C_G = gradient_confidence(losses, grad_norms, p, &out.s, &out.z);
  out.C = combine_confidence(out.C_S, out.C_G);
  return out;
}

}  // namespace fossa
