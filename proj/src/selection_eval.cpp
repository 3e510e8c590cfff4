#include "fossa/selection_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "fossa/rng.hpp"

namespace fossa {

Strategy strategy_from_string(const std::string& name) {
  if (name == "random") return Strategy::random;
  if (name == "maximin") return Strategy::maximin;
  if (name == "fossa_topk") return Strategy::fossa_topk;
  if (name == "fossa_high") return Strategy::fossa_band_high;
  if (name == "fossa_middle") return Strategy::fossa_band_middle;
  if (name == "fossa_low") return Strategy::fossa_band_low;
  throw ConfigError("unknown selection strategy '" + name + "'");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::random: return "random";
    case Strategy::maximin: return "maximin";
    case Strategy::fossa_topk: return "fossa_topk";
    case Strategy::fossa_band_high: return "fossa_high";
    case Strategy::fossa_band_middle: return "fossa_middle";
    case Strategy::fossa_band_low: return "fossa_low";
  }
  throw ConfigError("unknown strategy enum value");
}

double ExperimentResult::mean_re() const {
  if (re_values.empty()) return 0.0;
  return std::accumulate(re_values.begin(), re_values.end(), 0.0) /
         static_cast<double>(re_values.size());
}

double ExperimentResult::std_re() const {
  if (re_values.size() < 2) return 0.0;
  const double m = mean_re();
  double acc = 0.0;
  for (double r : re_values) acc += (r - m) * (r - m);
  return std::sqrt(acc / static_cast<double>(re_values.size() - 1));
}

std::vector<int> select_random(int n_sensors, int k, std::uint64_t seed) {
  if (k < 0 || k > n_sensors)
    throw ConfigError("select_random: k must be in [0, N_b], got k=" + std::to_string(k));
  Rng rng(seed);
  return rng.sample_without_replacement(n_sensors, k);
}

std::vector<int> select_maximin(const WeightedGraph& graph, int k, int start) {
  const int n = graph.node_count();
  if (k < 1 || k > n) throw ConfigError("select_maximin: k must be in [1, N]");
  if (start < 0 || start >= n) throw ConfigError("select_maximin: start node out of range");

  Eigen::VectorXd min_dist = geodesic_distances(graph, start);
  std::vector<int> unreachable;
  for (int i = 0; i < n; ++i)
    if (std::isinf(min_dist[i])) unreachable.push_back(i);
  if (!unreachable.empty()) {
    std::ostringstream msg;
    msg << "select_maximin: graph disconnected; unreachable nodes:";
    for (int i : unreachable) msg << " " << i;
    throw ConfigError(msg.str());
  }

  std::vector<int> chosen{start};
  std::vector<char> picked(n, 0);
  picked[start] = 1;
  while (static_cast<int>(chosen.size()) < k) {
    int best = -1;
    double best_dist = -1.0;
    for (int i = 0; i < n; ++i) {
      if (picked[i]) continue;
      if (min_dist[i] > best_dist) {  // strict: ties resolve to lowest index
        best_dist = min_dist[i];
        best = i;
      }
    }
    picked[best] = 1;
    chosen.push_back(best);
    const Eigen::VectorXd d = geodesic_distances(graph, best);
    min_dist = min_dist.cwiseMin(d);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<int> select_by_rank(const Eigen::VectorXd& s_tilde, int k, Band band) {
  const int n = static_cast<int>(s_tilde.size());
  if (k < 1 || k > n) throw ConfigError("select_by_rank: k must be in [1, N_b]");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (s_tilde[a] != s_tilde[b]) return s_tilde[a] > s_tilde[b];
    return a < b;
  });
  int offset = 0;
  switch (band) {
    case Band::high: offset = 0; break;
    case Band::middle: offset = (n - k) / 2; break;
    case Band::low: offset = n - k; break;
  }
  std::vector<int> out(order.begin() + offset, order.begin() + offset + k);
  std::sort(out.begin(), out.end());
  return out;
}

double relative_error(const FieldTimeSeries& u_hat, const FieldTimeSeries& u_true) {
  if (u_hat.u.rows() != u_true.u.rows() || u_hat.u.cols() != u_true.u.cols())
    throw ConfigError("relative_error: shape mismatch");
  const double denom = u_true.u.norm();
  if (!(denom > 0.0)) throw ConfigError("relative_error: ground truth has zero norm");
  return (u_hat.u - u_true.u).norm() / denom;
}

}  // namespace fossa
