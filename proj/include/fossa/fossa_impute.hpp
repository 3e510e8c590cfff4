#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fossa/geometry.hpp"

namespace fossa {

struct ImputationConfig {
  double tau = 0.5;          // trust threshold on C
  double idw_epsilon = 1e-12;  // stabilizer in w_ij = 1/(d_ij + eps)
  double delta = 1e-8;       // stop when the max update falls below this
  int max_iters = 10000;

  void validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("ImputationConfig: tau must be in [0,1]");
    if (!(idw_epsilon > 0.0)) throw ConfigError("ImputationConfig: idw_epsilon must be > 0");
    if (!(delta > 0.0)) throw ConfigError("ImputationConfig: delta must be > 0");
    if (max_iters < 1) throw ConfigError("ImputationConfig: max_iters must be >= 1");
  }
};

struct ImputedScores {
  Eigen::VectorXd S_tilde;
  std::vector<bool> trusted_mask;
  int iterations = 0;
  bool converged = false;
  std::vector<int> isolated_nodes;  // unreliable nodes with no neighbors at all
};

// T = {i : C_i >= tau}, M = complement. Ties are trusted. Throws
// ConfigError telling the user to lower tau if T would be empty.
std::pair<std::vector<int>, std::vector<int>> partition(const Eigen::VectorXd& C, double tau);

// Harmonic extension of trusted scores into M: unreliable nodes start at
// the trusted mean, then Jacobi sweeps of inverse-distance-weighted
// neighbor averages until the max change drops below delta. Trusted values
// are never touched.
ImputedScores impute(const WeightedGraph& graph, const Eigen::VectorXd& S,
                     const std::vector<int>& trusted, const std::vector<int>& unreliable,
                     const ImputationConfig& cfg);

}  // namespace fossa
