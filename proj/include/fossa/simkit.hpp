#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fossa/geometry.hpp"

namespace fossa {

// Aliev-Panfilov reaction-diffusion coefficients (dimensionless).
struct APParams {
  double diffusivity = 0.1;  // D
  double k_r = 8.0;
  double a = 0.15;
  double e0 = 0.002;
  double mu1 = 0.2;
  double mu2 = 0.3;

  void validate() const;  // D > 0, mu2 > 0, k_r > 0
};

// Heart-surface trajectory: u (normalized potential) and v (recovery),
// one column per recorded frame.
struct FieldTimeSeries {
  Eigen::MatrixXd u;       // N_h x N_t
  Eigen::MatrixXd v;       // N_h x N_t
  Eigen::VectorXd times;   // strictly increasing

  int node_count() const { return static_cast<int>(u.rows()); }
  int frame_count() const { return static_cast<int>(u.cols()); }
  void validate() const;
};

// Body-surface observations, one column per frame.
struct MeasurementSet {
  Eigen::MatrixXd y;  // N_b x N_t
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

// Initial excitation: u = 1 on `nodes` at t = 0, everything else at rest.
struct StimulusSpec {
  std::vector<int> nodes{0};
};

// du/dt and dv/dt of the AP model at one state:
//   du_i = (L u)_i + k_r u_i (u_i - a)(1 - u_i) - u_i v_i
//   dv_i = xi(u_i, v_i) (-v_i - k_r u_i (u_i - a - 1)),  xi = e0 + mu1 v/(u + mu2)
// Throws NumericalError naming the node if u_i + mu2 == 0.
void ap_rhs(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
            const WeightedGraph& graph, const APParams& p,
            Eigen::VectorXd& du_dt, Eigen::VectorXd& dv_dt);

// Explicit-Euler trajectory over n_steps of size dt, recording the initial
// state and every record_stride-th step. Warns on stderr if dt exceeds the
// diffusion stability bound; aborts (NumericalError, with step index) if the
// state goes non-finite.
FieldTimeSeries simulate_ap(const WeightedGraph& graph, const APParams& p,
                            const StimulusSpec& stimulus, double dt, int n_steps,
                            int record_stride = 1);

// y[:,t] = R u[:,t]; noise_sigma = 0 on the result.
MeasurementSet forward_observe(const TransferMatrix& R, const FieldTimeSeries& fields);

// y' = y + N(0, sigma^2) i.i.d. per entry from a seeded generator.
// Same seed, bit-identical output.
MeasurementSet add_noise(const MeasurementSet& clean, double sigma, std::uint64_t seed);

// Time-series CSV: one row per node, one column per frame; a JSON sidecar
// carries dt/params/seed/times.
void save_matrix_csv(const Eigen::MatrixXd& m, const std::string& path,
                     const std::vector<std::string>& comment_lines = {});
Eigen::MatrixXd load_matrix_csv(const std::string& path);

}  // namespace fossa
