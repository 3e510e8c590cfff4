#include "fossa/fossa_impute.hpp"

#include <cmath>

namespace fossa {

std::pair<std::vector<int>, std::vector<int>> partition(const Eigen::VectorXd& C, double tau) {
  std::vector<int> trusted, unreliable;
  for (Eigen::Index i = 0; i < C.size(); ++i) {
    if (!std::isfinite(C[i]))
      throw ConfigError("partition: non-finite confidence at sensor " + std::to_string(i));
    (C[i] >= tau ? trusted : unreliable).push_back(static_cast<int>(i));
  }
  if (trusted.empty())
    throw ConfigError("partition: no sensor reaches confidence tau = " + std::to_string(tau) +
                      "; lower tau (imputation needs at least one trusted anchor)");
  return {std::move(trusted), std::move(unreliable)};
}

ImputedScores impute(const WeightedGraph& graph, const Eigen::VectorXd& S,
                     const std::vector<int>& trusted, const std::vector<int>& unreliable,
                     const ImputationConfig& cfg) {
  cfg.validate();
  const int n = graph.node_count();
  if (S.size() != n) throw ConfigError("impute: score length does not match graph");
  if (trusted.empty()) throw ConfigError("impute: trusted set must be nonempty");
  std::vector<char> is_unreliable(n, 0);
  for (int i : unreliable) {
    if (i < 0 || i >= n) throw ConfigError("impute: unreliable index out of range");
    is_unreliable[i] = 1;
  }
  for (int i : trusted) {
    if (i < 0 || i >= n) throw ConfigError("impute: trusted index out of range");
    if (is_unreliable[i]) throw ConfigError("impute: node " + std::to_string(i) +
                                            " is in both trusted and unreliable sets");
    if (!std::isfinite(S[i]))
      throw ConfigError("impute: trusted anchor " + std::to_string(i) +
                        " carries a non-finite score");
  }

  ImputedScores out;
  out.trusted_mask.assign(n, false);
  out.S_tilde = S;

  double trusted_mean = 0.0;
  for (int i : trusted) {
    trusted_mean += S[i];
    out.trusted_mask[i] = true;
  }
  trusted_mean /= static_cast<double>(trusted.size());
  for (int i : unreliable) out.S_tilde[i] = trusted_mean;

  if (unreliable.empty()) {
    out.converged = true;
    out.iterations = 0;
    return out;
  }

  for (int i : unreliable)
    if (graph.adjacency[i].empty()) out.isolated_nodes.push_back(i);

  Eigen::VectorXd next = out.S_tilde;
  for (int sweep = 1; sweep <= cfg.max_iters; ++sweep) {
    double max_change = 0.0;
    for (int i : unreliable) {
      if (graph.adjacency[i].empty()) continue;  // keeps its initialization
      double num = 0.0, den = 0.0;
      for (const auto& edge : graph.adjacency[i]) {
        const double wij = 1.0 / (edge.length + cfg.idw_epsilon);
        num += wij * out.S_tilde[edge.to];
        den += wij;
      }
      next[i] = num / den;
      max_change = std::max(max_change, std::abs(next[i] - out.S_tilde[i]));
    }
    for (int i : unreliable) out.S_tilde[i] = next[i];
    out.iterations = sweep;
    if (max_change < cfg.delta) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace fossa
