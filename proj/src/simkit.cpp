#include "fossa/simkit.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fossa/rng.hpp"

namespace fossa {

void APParams::validate() const {
  if (!(diffusivity > 0.0)) throw ConfigError("APParams: diffusivity must be > 0");
  if (!(mu2 > 0.0)) throw ConfigError("APParams: mu2 must be > 0");
  if (!(k_r > 0.0)) throw ConfigError("APParams: k_r must be > 0");
}

void FieldTimeSeries::validate() const {
  if (u.rows() != v.rows() || u.cols() != v.cols())
    throw ConfigError("FieldTimeSeries: u and v shapes differ");
  if (times.size() != u.cols())
    throw ConfigError("FieldTimeSeries: times length does not match frame count");
  for (int t = 1; t < times.size(); ++t)
    if (!(times[t] > times[t - 1]))
      throw ConfigError("FieldTimeSeries: times must be strictly increasing");
}

void ap_rhs(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
            const WeightedGraph& graph, const APParams& p,
            Eigen::VectorXd& du_dt, Eigen::VectorXd& dv_dt) {
  const int n = graph.node_count();
  if (u.size() != n || v.size() != n)
    throw ConfigError("ap_rhs: state length does not match node count");
  du_dt = graph_laplacian_apply(graph, u, p.diffusivity);
  dv_dt.resize(n);
  for (int i = 0; i < n; ++i) {
    const double ui = u[i], vi = v[i];
    du_dt[i] += p.k_r * ui * (ui - p.a) * (1.0 - ui) - ui * vi;
    const double denom = ui + p.mu2;
    if (denom == 0.0)
      throw NumericalError("ap_rhs: xi singular (u + mu2 = 0) at node " + std::to_string(i));
    const double xi = p.e0 + p.mu1 * vi / denom;
    dv_dt[i] = xi * (-vi - p.k_r * ui * (ui - p.a - 1.0));
  }
}

FieldTimeSeries simulate_ap(const WeightedGraph& graph, const APParams& p,
                            const StimulusSpec& stimulus, double dt, int n_steps,
                            int record_stride) {
  p.validate();
  if (!(dt > 0.0)) throw ConfigError("simulate_ap: dt must be > 0");
  if (n_steps < 0) throw ConfigError("simulate_ap: n_steps must be >= 0");
  if (record_stride < 1) throw ConfigError("simulate_ap: record_stride must be >= 1");
  const int n = graph.node_count();

  const double row_sum = laplacian_max_row_sum(graph, p.diffusivity);
  if (row_sum > 0.0 && dt >= 2.0 / row_sum)
    std::cerr << "simulate_ap: warning: dt=" << dt
              << " exceeds diffusion stability bound " << 2.0 / row_sum << "\n";

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (int node : stimulus.nodes) {
    if (node < 0 || node >= n)
      throw ConfigError("simulate_ap: stimulus node " + std::to_string(node) + " out of range");
    u[node] = 1.0;
  }

  const int frames = n_steps / record_stride + 1;
  FieldTimeSeries out;
  out.u.resize(n, frames);
  out.v.resize(n, frames);
  out.times.resize(frames);
  out.u.col(0) = u;
  out.v.col(0) = v;
  out.times[0] = 0.0;

  Eigen::VectorXd du, dv;
  int frame = 1;
  for (int step = 1; step <= n_steps; ++step) {
    ap_rhs(u, v, graph, p, du, dv);
    u += dt * du;
    v += dt * dv;
    if (!u.allFinite() || !v.allFinite())
      throw NumericalError("simulate_ap: non-finite state at step " + std::to_string(step));
    if (step % record_stride == 0) {
      out.u.col(frame) = u;
      out.v.col(frame) = v;
      out.times[frame] = step * dt;
      ++frame;
    }
  }
  out.u.conservativeResize(n, frame);
  out.v.conservativeResize(n, frame);
  out.times.conservativeResize(frame);
  return out;
}

MeasurementSet forward_observe(const TransferMatrix& R, const FieldTimeSeries& fields) {
  if (R.heart_count() != fields.node_count())
    throw ConfigError("forward_observe: R has " + std::to_string(R.heart_count()) +
                      " columns but the field has " + std::to_string(fields.node_count()) +
                      " nodes");
  MeasurementSet m;
  m.y = R.entries * fields.u;
  m.noise_sigma = 0.0;
  m.seed = 0;
  return m;
}

MeasurementSet add_noise(const MeasurementSet& clean, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("add_noise: sigma must be >= 0");
  MeasurementSet out = clean;
  out.noise_sigma = sigma;
  out.seed = seed;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  // Column-major fill order; part of the determinism contract.
  for (Eigen::Index c = 0; c < out.y.cols(); ++c)
    for (Eigen::Index r = 0; r < out.y.rows(); ++r)
      out.y(r, c) += sigma * rng.normal();
  return out;
}

void save_matrix_csv(const Eigen::MatrixXd& m, const std::string& path,
                     const std::vector<std::string>& comment_lines) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_matrix_csv: cannot write " + path);
  for (const auto& c : comment_lines) out << "# " << c << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf;
    }
    out << "\n";
  }
}

Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_matrix_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError("load_matrix_csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("load_matrix_csv: no data in " + path);
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace fossa
