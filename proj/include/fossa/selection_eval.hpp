#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fossa/geometry.hpp"
#include "fossa/simkit.hpp"

namespace fossa {

enum class Band { high, middle, low };

enum class Strategy { random, maximin, fossa_topk, fossa_band_high, fossa_band_middle,
                      fossa_band_low };

Strategy strategy_from_string(const std::string& name);
std::string to_string(Strategy s);

struct SelectionSpec {
  Strategy strategy = Strategy::fossa_topk;
  int budget = 1;           // k
  std::uint64_t seed = 0;   // random only
  int start_node = 0;       // maximin only

  void validate(int n_sensors) const {
    if (budget < 1 || budget > n_sensors)
      throw ConfigError("SelectionSpec: budget must be in [1, N_b]");
    if (start_node < 0 || start_node >= n_sensors)
      throw ConfigError("SelectionSpec: start node out of range");
  }
};

// One experiment cell: per-seed relative errors plus summary statistics.
struct ExperimentResult {
  std::string strategy;
  int budget = 0;
  double sigma = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> re_values;
  std::vector<double> wall_seconds;  // per seed

  double mean_re() const;
  double std_re() const;  // sample standard deviation over seeds
};

// Uniform sample of k sensors without replacement, seeded, ascending.
std::vector<int> select_random(int n_sensors, int k, std::uint64_t seed);

// Greedy maximin geodesic placement starting at `start`; deterministic
// tie-break toward the lowest index. Throws ConfigError listing
// unreachable nodes if the graph is disconnected.
std::vector<int> select_maximin(const WeightedGraph& graph, int k, int start);

// Rank window over scores sorted descending (ties broken by index):
// high = ranks 1..k, low = last k ranks, middle = centered window of
// length k at offset floor((N_b - k)/2). Ascending index output.
std::vector<int> select_by_rank(const Eigen::VectorXd& s_tilde, int k, Band band);

// RE = ||u_hat - u||_2 / ||u||_2 over the full spatiotemporal domain.
double relative_error(const FieldTimeSeries& u_hat, const FieldTimeSeries& u_true);

}  // namespace fossa
