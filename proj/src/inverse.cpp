#include "fossa/inverse.hpp"

#include <cmath>
#include <sstream>

#include "fossa/rng.hpp"

namespace fossa {

CollocationSet sample_collocation(int n_points, int node_count, double t_lo, double t_hi,
                                  std::uint64_t seed) {
  if (n_points < 0) throw ConfigError("sample_collocation: n_points must be >= 0");
  if (node_count < 1) throw ConfigError("sample_collocation: node_count must be >= 1");
  if (!(t_hi >= t_lo)) throw ConfigError("sample_collocation: need t_hi >= t_lo");
  CollocationSet coll;
  coll.seed = seed;
  coll.points.reserve(n_points);
  Rng rng(seed);
  for (int k = 0; k < n_points; ++k)
    coll.points.push_back({rng.below_int(node_count), rng.uniform(t_lo, t_hi)});
  return coll;
}

void InverseProblem::validate() const {
  R.validate();
  if (y.rows() != R.body_count())
    throw ConfigError("InverseProblem: y has " + std::to_string(y.rows()) +
                      " rows but R has " + std::to_string(R.body_count()) + " body rows");
  if (heart_coords.rows() != 3)
    throw ConfigError("InverseProblem: heart_coords must be 3 x N_h");
  if (heart_coords.cols() != R.heart_count())
    throw ConfigError("InverseProblem: heart_coords count does not match R columns");
  if (y.cols() != times.size())
    throw ConfigError("InverseProblem: y frame count does not match times");
  if (heart_graph.node_count() != heart_count())
    throw ConfigError("InverseProblem: heart graph node count mismatch");
  ap.validate();
}

Eigen::MatrixXd InverseProblem::data_inputs() const {
  const int nh = heart_count(), nt = frame_count();
  Eigen::MatrixXd X(4, static_cast<Eigen::Index>(nh) * nt);
  for (int t = 0; t < nt; ++t) {
    for (int j = 0; j < nh; ++j) {
      const Eigen::Index c = static_cast<Eigen::Index>(t) * nh + j;
      X.col(c).head<3>() = heart_coords.col(j);
      X(3, c) = times[t];
    }
  }
  return X;
}

InverseProblem InverseProblem::restricted_to(const std::vector<int>& sensors) const {
  if (sensors.empty()) throw ConfigError("InverseProblem::restricted_to: empty sensor set");
  InverseProblem out = *this;
  out.R.entries.resize(sensors.size(), R.heart_count());
  out.y.resize(sensors.size(), y.cols());
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    const int s = sensors[k];
    if (s < 0 || s >= body_count())
      throw ConfigError("InverseProblem::restricted_to: sensor " + std::to_string(s) +
                        " out of range");
    if (k > 0 && sensors[k] <= sensors[k - 1])
      throw ConfigError("InverseProblem::restricted_to: sensors must be sorted and unique");
    out.R.entries.row(k) = R.entries.row(s);
    out.y.row(k) = y.row(s);
  }
  return out;
}

namespace {

// Predicted u at all heart nodes/frames, as an N_h x N_t matrix, plus the
// tape for the reverse sweep.
struct DataForward {
  std::unique_ptr<EvalTape> tape;
  Eigen::MatrixXd u;  // N_h x N_t
  Eigen::Index batch = 0;
};

DataForward data_forward(const FieldModel& model, const Eigen::VectorXd& theta,
                         const InverseProblem& problem) {
  DataForward f;
  const Eigen::MatrixXd X = problem.data_inputs();
  Eigen::MatrixXd Y;
  f.tape = model.forward_batch(theta, X, Y);
  if (!Y.allFinite()) throw NumericalError("data loss: non-finite model output");
  f.batch = Y.cols();
  Eigen::VectorXd uflat = Y.row(0).transpose();
  f.u = Eigen::Map<const Eigen::MatrixXd>(uflat.data(), problem.heart_count(),
                                          problem.frame_count());
  return f;
}

// Weighted data term lambda_d * sum_i w_i l_i. Fills per-sensor losses and,
// when grad is non-null, accumulates the parameter gradient through the
// recorded tape. The per-sensor rank-one accumulation keeps w_i = 0 sensors
// bit-identical to deleted ones.
double data_loss_eval(const FieldModel& model, const Eigen::VectorXd& theta,
                      const InverseProblem& problem, const Eigen::VectorXd& w,
                      double lambda_d, Eigen::VectorXd* per_sensor,
                      Eigen::VectorXd* grad) {
  if (w.size() != problem.body_count())
    throw ConfigError("data loss: weight length does not match sensor count");
  DataForward f = data_forward(model, theta, problem);
  const Eigen::MatrixXd pred = problem.R.entries * f.u;             // N_b x N_t
  const Eigen::MatrixXd resid = pred - problem.y;                   // N_b x N_t
  double value = 0.0;
  if (per_sensor) per_sensor->resize(problem.body_count());
  for (int i = 0; i < problem.body_count(); ++i) {
    const double li = resid.row(i).squaredNorm();
    if (per_sensor) (*per_sensor)[i] = li;
    value += w[i] * li;
  }
  value *= lambda_d;
  if (grad) {
    Eigen::MatrixXd dU = Eigen::MatrixXd::Zero(problem.heart_count(), problem.frame_count());
    for (int i = 0; i < problem.body_count(); ++i) {
      const double c = 2.0 * lambda_d * w[i];
      dU.noalias() += c * (problem.R.entries.row(i).transpose() * resid.row(i));
    }
    Eigen::MatrixXd dY = Eigen::MatrixXd::Zero(2, f.batch);
    dY.row(0) = Eigen::Map<const Eigen::VectorXd>(dU.data(), dU.size()).transpose();
    model.backward(*f.tape, dY, *grad);
  }
  return value;
}

struct PhysicsBatch {
  Eigen::MatrixXd Xc;            // 4 x N_f collocation inputs
  Eigen::MatrixXd Xn;            // 4 x M neighbor inputs
  std::vector<int> owner;        // M: collocation index of each neighbor entry
  std::vector<double> lap_w;     // M: D / d_ij
  Eigen::VectorXd row_sum;       // N_f: sum of lap weights per point
};

PhysicsBatch build_physics_batch(const WeightedGraph& graph, const APParams& ap,
                                 const Eigen::MatrixXd& coords, const CollocationSet& coll) {
  const int nf = static_cast<int>(coll.points.size());
  PhysicsBatch b;
  b.Xc.resize(4, nf);
  b.row_sum = Eigen::VectorXd::Zero(nf);
  std::size_t m = 0;
  for (const auto& p : coll.points) m += graph.adjacency.at(p.node).size();
  b.Xn.resize(4, static_cast<Eigen::Index>(m));
  b.owner.reserve(m);
  b.lap_w.reserve(m);
  Eigen::Index e = 0;
  for (int k = 0; k < nf; ++k) {
    const auto& p = coll.points[k];
    if (p.node < 0 || p.node >= graph.node_count())
      throw ConfigError("physics loss: collocation node " + std::to_string(p.node) +
                        " out of range");
    b.Xc.col(k).head<3>() = coords.col(p.node);
    b.Xc(3, k) = p.time;
    for (const auto& edge : graph.adjacency[p.node]) {
      b.Xn.col(e).head<3>() = coords.col(edge.to);
      b.Xn(3, e) = p.time;
      b.owner.push_back(k);
      b.lap_w.push_back(ap.diffusivity / edge.length);
      b.row_sum[k] += ap.diffusivity / edge.length;
      ++e;
    }
  }
  return b;
}

double physics_eval(const FieldModel& model, const Eigen::VectorXd& theta,
                    const WeightedGraph& graph, const APParams& ap,
                    const Eigen::MatrixXd& coords, const CollocationSet& coll,
                    Eigen::VectorXd* grad) {
  const int nf = static_cast<int>(coll.points.size());
  if (nf == 0) return 0.0;
  const PhysicsBatch b = build_physics_batch(graph, ap, coords, coll);

  Eigen::MatrixXd Yc, Ycdot, Yn;
  auto tape_c = model.forward_dt_batch(theta, b.Xc, Yc, Ycdot);
  std::unique_ptr<EvalTape> tape_n;
  const bool have_neighbors = b.Xn.cols() > 0;
  if (have_neighbors) tape_n = model.forward_batch(theta, b.Xn, Yn);
  if (!Yc.allFinite() || !Ycdot.allFinite() || (have_neighbors && !Yn.allFinite()))
    throw NumericalError("physics loss: non-finite model output");

  // Laplacian at each collocation point from neighbor evaluations.
  Eigen::VectorXd lap = Eigen::VectorXd::Zero(nf);
  for (std::size_t e = 0; e < b.owner.size(); ++e)
    lap[b.owner[e]] += b.lap_w[e] * (Yn(0, static_cast<Eigen::Index>(e)) - Yc(0, b.owner[e]));

  Eigen::VectorXd ru(nf), rv(nf);
  Eigen::VectorXd du_c(nf), dv_c(nf);  // adjoint seeds for u, v at collocation points
  double loss = 0.0;
  for (int k = 0; k < nf; ++k) {
    const double u = Yc(0, k), v = Yc(1, k);
    const double udot = Ycdot(0, k), vdot = Ycdot(1, k);
    const double denom = u + ap.mu2;
    if (denom == 0.0)
      throw NumericalError("physics loss: xi singular (u + mu2 = 0) at collocation point " +
                           std::to_string(k));
    const double xi = ap.e0 + ap.mu1 * v / denom;
    const double h = -v - ap.k_r * u * (u - ap.a - 1.0);
    ru[k] = udot - lap[k] - ap.k_r * u * (u - ap.a) * (1.0 - u) + u * v;
    rv[k] = vdot - xi * h;
    loss += ru[k] * ru[k] + rv[k] * rv[k];
    if (grad) {
      const double g_prime = ap.k_r * (2.0 * u - ap.a - 3.0 * u * u + 2.0 * ap.a * u);
      const double xi_u = -ap.mu1 * v / (denom * denom);
      const double h_u = -ap.k_r * (2.0 * u - ap.a - 1.0);
      const double xi_v = ap.mu1 / denom;
      du_c[k] = ru[k] * (b.row_sum[k] - g_prime + v) + rv[k] * (-(xi_u * h + xi * h_u));
      dv_c[k] = ru[k] * u + rv[k] * (-(xi_v * h - xi));
    }
  }
  loss /= nf;
  if (!std::isfinite(loss)) throw NumericalError("physics loss: non-finite residual");

  if (grad) {
    const double scale = 2.0 / nf;  // d loss / d r
    Eigen::MatrixXd dYc(2, nf), dYcdot(2, nf);
    dYc.row(0) = (scale * du_c).transpose();
    dYc.row(1) = (scale * dv_c).transpose();
    dYcdot.row(0) = (scale * ru).transpose();
    dYcdot.row(1) = (scale * rv).transpose();
    model.backward_dt(*tape_c, dYc, dYcdot, *grad);
    if (have_neighbors) {
      Eigen::MatrixXd dYn = Eigen::MatrixXd::Zero(2, b.Xn.cols());
      for (std::size_t e = 0; e < b.owner.size(); ++e)
        dYn(0, static_cast<Eigen::Index>(e)) = -scale * ru[b.owner[e]] * b.lap_w[e];
      model.backward(*tape_n, dYn, *grad);
    }
  }
  return loss;
}

}  // namespace

double sensor_loss(const FieldModel& model, const ParamVector& theta,
                   const InverseProblem& problem, int sensor) {
  if (sensor < 0 || sensor >= problem.body_count())
    throw ConfigError("sensor_loss: sensor index " + std::to_string(sensor) + " out of range");
  return all_sensor_losses(model, theta, problem)[sensor];
}

Eigen::VectorXd all_sensor_losses(const FieldModel& model, const ParamVector& theta,
                                  const InverseProblem& problem) {
  model.check_theta(theta.values);
  problem.validate();
  Eigen::VectorXd per_sensor;
  data_loss_eval(model, theta.values, problem, Eigen::VectorXd::Ones(problem.body_count()),
                 1.0, &per_sensor, nullptr);
  return per_sensor;
}

double physics_loss(const FieldModel& model, const ParamVector& theta,
                    const WeightedGraph& graph, const APParams& ap,
                    const Eigen::MatrixXd& heart_coords, const CollocationSet& coll) {
  model.check_theta(theta.values);
  ap.validate();
  return physics_eval(model, theta.values, graph, ap, heart_coords, coll, nullptr);
}

double total_loss(const FieldModel& model, const ParamVector& theta,
                  const InverseProblem& problem, const SensorWeights& w,
                  const LossWeights& lw, const CollocationSet& coll) {
  w.validate();
  lw.validate();
  problem.validate();
  const double data =
      data_loss_eval(model, theta.values, problem, w.w, lw.lambda_d, nullptr, nullptr);
  const double phys = lw.lambda_p == 0.0
                          ? 0.0
                          : physics_eval(model, theta.values, problem.heart_graph, problem.ap,
                                         problem.heart_coords, coll, nullptr);
  return data + lw.lambda_p * phys;
}

double total_loss_grad(const FieldModel& model, const ParamVector& theta,
                       const InverseProblem& problem, const SensorWeights& w,
                       const LossWeights& lw, const CollocationSet& coll,
                       Eigen::VectorXd& grad) {
  w.validate();
  lw.validate();
  grad = Eigen::VectorXd::Zero(model.param_count());
  const double data = data_loss_eval(model, theta.values, problem, w.w, lw.lambda_d,
                                     nullptr, &grad);
  double phys = 0.0;
  if (lw.lambda_p > 0.0) {
    Eigen::VectorXd pgrad = Eigen::VectorXd::Zero(model.param_count());
    phys = physics_eval(model, theta.values, problem.heart_graph, problem.ap,
                        problem.heart_coords, coll, &pgrad);
    grad.noalias() += lw.lambda_p * pgrad;
  }
  if (!grad.allFinite()) throw NumericalError("total_loss_grad: non-finite gradient");
  return data + lw.lambda_p * phys;
}

Eigen::VectorXd sensor_loss_gradient(const FieldModel& model, const ParamVector& theta,
                                     const InverseProblem& problem, int sensor) {
  if (sensor < 0 || sensor >= problem.body_count())
    throw ConfigError("sensor_loss_gradient: sensor index out of range");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(problem.body_count());
  w[sensor] = 1.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.param_count());
  data_loss_eval(model, theta.values, problem, w, 1.0, nullptr, &grad);
  return grad;
}

std::pair<ParamVector, TrainReport> train(const FieldModel& model, const ParamVector& theta0,
                                          const InverseProblem& problem,
                                          const SensorWeights& w, const LossWeights& lw,
                                          const CollocationSet& coll, const TrainConfig& cfg) {
  cfg.validate();
  theta0.validate();
  model.check_theta(theta0.values);

  ParamVector theta = theta0;
  TrainReport report;
  Eigen::VectorXd grad;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.length());
  Eigen::VectorXd s = Eigen::VectorXd::Zero(theta.length());

  for (int it = 0;; ++it) {
    double loss;
    try {
      loss = total_loss_grad(model, theta, problem, w, lw, coll, grad);
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "train: diverged at iteration " << it << " (" << e.what() << "); loss history:";
      for (double l : report.loss_history) msg << " " << l;
      throw NumericalError(msg.str());
    }
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "train: non-finite loss at iteration " << it << "; loss history:";
      for (double l : report.loss_history) msg << " " << l;
      throw NumericalError(msg.str());
    }
    report.loss_history.push_back(loss);
    if (it == 0)
      report.g_tol_used = cfg.g_tol > 0.0 ? cfg.g_tol : 1e-4 * (1.0 + std::abs(loss));
    const double gnorm = grad.norm();
    report.final_loss = loss;
    report.final_grad_norm = gnorm;
    report.iterations = it;
    if (gnorm <= report.g_tol_used) {
      report.converged = true;
      return {theta, report};
    }
    if (it == cfg.max_iters) {
      report.converged = false;
      return {theta, report};
    }
    // Adam with bias correction.
    const double t = it + 1;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    s = cfg.beta2 * s + (1.0 - cfg.beta2) * grad.cwiseProduct(grad).eval();
    const double mc = 1.0 - std::pow(cfg.beta1, t);
    const double sc = 1.0 - std::pow(cfg.beta2, t);
    theta.values.array() -=
        cfg.step_size * (m.array() / mc) / ((s.array() / sc).sqrt() + cfg.adam_eps);
  }
}

}  // namespace fossa
