#include "fossa/model.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fossa/rng.hpp"
#include "fossa/simkit.hpp"

namespace fossa {

namespace {

struct MlpTape final : EvalTape {
  Eigen::VectorXd theta;                // weights used by the reverse sweep
  std::vector<Eigen::MatrixXd> act;     // act[0] = scaled input, act[L] = output
  std::vector<Eigen::MatrixXd> actdot;  // time tangents (tangent pass only)
  std::vector<Eigen::MatrixXd> zdot;    // pre-activation tangents, index 1..L
  bool has_tangent = false;
};

struct LinearTape final : EvalTape {
  Eigen::MatrixXd phi_u, phi_v;          // P x B feature matrices
  Eigen::MatrixXd phi_u_dot, phi_v_dot;  // tangent pass only
  bool has_tangent = false;
};

double pow_int(double x, int p) {
  double out = 1.0;
  for (int i = 0; i < p; ++i) out *= x;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// MlpFieldModel

MlpFieldModel::MlpFieldModel(std::vector<int> layer_sizes, Eigen::Vector4d scale_lo,
                             Eigen::Vector4d scale_hi)
    : layer_sizes_(std::move(layer_sizes)), scale_lo_(scale_lo), scale_hi_(scale_hi) {
  if (layer_sizes_.size() < 3)
    throw ConfigError("MlpFieldModel: need at least one hidden layer");
  if (layer_sizes_.front() != 4 || layer_sizes_.back() != 2)
    throw ConfigError("MlpFieldModel: layer sizes must run from 4 inputs to 2 outputs");
  for (int s : layer_sizes_)
    if (s < 1) throw ConfigError("MlpFieldModel: layer sizes must be positive");
  for (int i = 0; i < 4; ++i)
    if (!(scale_hi_[i] > scale_lo_[i]))
      throw ConfigError("MlpFieldModel: scaling bounds must satisfy hi > lo per dimension");
  layer_offsets_.resize(layer_count());
  int offset = 0;
  for (int l = 0; l < layer_count(); ++l) {
    layer_offsets_[l] = offset;
    offset += layer_sizes_[l] * layer_sizes_[l + 1] + layer_sizes_[l + 1];
  }
  param_count_ = offset;
}

Eigen::Map<const Eigen::MatrixXd> MlpFieldModel::weight(const Eigen::VectorXd& theta,
                                                        int l) const {
  return {theta.data() + layer_offsets_[l], layer_sizes_[l + 1], layer_sizes_[l]};
}

Eigen::Map<const Eigen::VectorXd> MlpFieldModel::bias(const Eigen::VectorXd& theta,
                                                      int l) const {
  return {theta.data() + layer_offsets_[l] + layer_sizes_[l] * layer_sizes_[l + 1],
          layer_sizes_[l + 1]};
}

Eigen::Map<Eigen::MatrixXd> MlpFieldModel::weight_grad(Eigen::VectorXd& g, int l) const {
  return {g.data() + layer_offsets_[l], layer_sizes_[l + 1], layer_sizes_[l]};
}

Eigen::Map<Eigen::VectorXd> MlpFieldModel::bias_grad(Eigen::VectorXd& g, int l) const {
  return {g.data() + layer_offsets_[l] + layer_sizes_[l] * layer_sizes_[l + 1],
          layer_sizes_[l + 1]};
}

ParamVector MlpFieldModel::init_params(std::uint64_t seed) const {
  Rng rng(seed);
  ParamVector theta;
  theta.values = Eigen::VectorXd::Zero(param_count_);
  for (int l = 0; l < layer_count(); ++l) {
    const int n_in = layer_sizes_[l], n_out = layer_sizes_[l + 1];
    const double bound = std::sqrt(6.0 / (n_in + n_out));
    double* w = theta.values.data() + layer_offsets_[l];
    for (int k = 0; k < n_in * n_out; ++k) w[k] = rng.uniform(-bound, bound);
    // biases stay zero
  }
  return theta;
}

std::unique_ptr<EvalTape> MlpFieldModel::forward_batch(const Eigen::VectorXd& theta,
                                                       const Eigen::MatrixXd& X,
                                                       Eigen::MatrixXd& Y) const {
  check_theta(theta);
  if (X.rows() != 4) throw ConfigError("MlpFieldModel: input batch must have 4 rows");
  auto tape = std::make_unique<MlpTape>();
  tape->theta = theta;
  const int L = layer_count();
  tape->act.resize(L + 1);
  tape->act[0] = ((X.colwise() - scale_lo_).array().colwise() /
                  (scale_hi_ - scale_lo_).array() * 2.0 - 1.0)
                     .matrix();
  for (int l = 1; l <= L; ++l) {
    Eigen::MatrixXd z = (weight(theta, l - 1) * tape->act[l - 1]).colwise() + bias(theta, l - 1);
    if (l < L)
      tape->act[l] = z.array().tanh().matrix();
    else
      tape->act[l] = std::move(z);
  }
  Y = tape->act[L];
  return tape;
}

void MlpFieldModel::backward(const EvalTape& tape_in, const Eigen::MatrixXd& dY,
                             Eigen::VectorXd& grad) const {
  const auto& tape = dynamic_cast<const MlpTape&>(tape_in);
  const int L = layer_count();
  if (dY.rows() != 2 || dY.cols() != tape.act[L].cols())
    throw ConfigError("MlpFieldModel::backward: dY shape mismatch");
  Eigen::MatrixXd gA = dY;
  for (int l = L; l >= 1; --l) {
    Eigen::MatrixXd gZ;
    if (l == L)
      gZ = std::move(gA);
    else
      gZ = (1.0 - tape.act[l].array().square()).matrix().cwiseProduct(gA);
    weight_grad(grad, l - 1).noalias() += gZ * tape.act[l - 1].transpose();
    bias_grad(grad, l - 1).noalias() += gZ.rowwise().sum();
    if (l > 1) gA.noalias() = weight(tape.theta, l - 1).transpose() * gZ;
  }
}

std::unique_ptr<EvalTape> MlpFieldModel::forward_dt_batch(const Eigen::VectorXd& theta,
                                                          const Eigen::MatrixXd& X,
                                                          Eigen::MatrixXd& Y,
                                                          Eigen::MatrixXd& Ydot) const {
  check_theta(theta);
  if (X.rows() != 4) throw ConfigError("MlpFieldModel: input batch must have 4 rows");
  auto tape = std::make_unique<MlpTape>();
  tape->theta = theta;
  tape->has_tangent = true;
  const int L = layer_count();
  const int B = static_cast<int>(X.cols());
  tape->act.resize(L + 1);
  tape->actdot.resize(L + 1);
  tape->zdot.resize(L + 1);
  tape->act[0] = ((X.colwise() - scale_lo_).array().colwise() /
                  (scale_hi_ - scale_lo_).array() * 2.0 - 1.0)
                     .matrix();
  tape->actdot[0] = Eigen::MatrixXd::Zero(4, B);
  tape->actdot[0].row(3).setConstant(2.0 / (scale_hi_[3] - scale_lo_[3]));
  for (int l = 1; l <= L; ++l) {
    const auto W = weight(theta, l - 1);
    Eigen::MatrixXd z = (W * tape->act[l - 1]).colwise() + bias(theta, l - 1);
    tape->zdot[l].noalias() = W * tape->actdot[l - 1];
    if (l < L) {
      tape->act[l] = z.array().tanh().matrix();
      tape->actdot[l] =
          (1.0 - tape->act[l].array().square()).matrix().cwiseProduct(tape->zdot[l]);
    } else {
      tape->act[l] = std::move(z);
      tape->actdot[l] = tape->zdot[l];
    }
  }
  Y = tape->act[L];
  Ydot = tape->actdot[L];
  return tape;
}

void MlpFieldModel::backward_dt(const EvalTape& tape_in, const Eigen::MatrixXd& dY,
                                const Eigen::MatrixXd& dYdot, Eigen::VectorXd& grad) const {
  const auto& tape = dynamic_cast<const MlpTape&>(tape_in);
  if (!tape.has_tangent)
    throw ConfigError("MlpFieldModel::backward_dt: tape lacks a tangent pass");
  const int L = layer_count();
  Eigen::MatrixXd gA = dY;
  Eigen::MatrixXd gAdot = dYdot;
  for (int l = L; l >= 1; --l) {
    Eigen::MatrixXd gZ, gZdot;
    if (l == L) {
      gZ = std::move(gA);
      gZdot = std::move(gAdot);
    } else {
      const auto one_minus_a2 = (1.0 - tape.act[l].array().square());
      gZdot = one_minus_a2.matrix().cwiseProduct(gAdot);
      // adot = (1 - a^2) zdot couples the tangent back into the primal a.
      gA.array() += -2.0 * tape.act[l].array() * tape.zdot[l].array() * gAdot.array();
      gZ = one_minus_a2.matrix().cwiseProduct(gA);
    }
    weight_grad(grad, l - 1).noalias() += gZ * tape.act[l - 1].transpose();
    weight_grad(grad, l - 1).noalias() += gZdot * tape.actdot[l - 1].transpose();
    bias_grad(grad, l - 1).noalias() += gZ.rowwise().sum();
    if (l > 1) {
      const auto W = weight(tape.theta, l - 1);
      gA.noalias() = W.transpose() * gZ;
      gAdot.noalias() = W.transpose() * gZdot;
    }
  }
}

// ---------------------------------------------------------------------------
// LinearFieldModel

LinearFieldModel::LinearFieldModel(std::vector<std::vector<Monomial>> u_basis,
                                   std::vector<std::vector<Monomial>> v_basis)
    : u_basis_(std::move(u_basis)), v_basis_(std::move(v_basis)) {
  if (v_basis_.empty()) v_basis_.resize(u_basis_.size());
  if (u_basis_.size() != v_basis_.size())
    throw ConfigError("LinearFieldModel: u and v bases must have equal parameter counts");
  if (u_basis_.empty()) throw ConfigError("LinearFieldModel: empty basis");
  auto check = [](const std::vector<std::vector<Monomial>>& basis) {
    for (const auto& feats : basis)
      for (const auto& m : feats) {
        if (m.px < 0 || m.py < 0 || m.pz < 0 || m.pt < 0)
          throw ConfigError("LinearFieldModel: monomial powers must be >= 0");
        if (!std::isfinite(m.coeff))
          throw ConfigError("LinearFieldModel: non-finite monomial coefficient");
      }
  };
  check(u_basis_);
  check(v_basis_);
}

Eigen::MatrixXd LinearFieldModel::features(const Eigen::MatrixXd& X, bool v_channel,
                                           bool d_dt) const {
  const auto& basis = v_channel ? v_basis_ : u_basis_;
  const int P = param_count();
  const int B = static_cast<int>(X.cols());
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(P, B);
  for (int k = 0; k < P; ++k) {
    for (const auto& m : basis[k]) {
      for (int b = 0; b < B; ++b) {
        const double x = X(0, b), y = X(1, b), z = X(2, b), t = X(3, b);
        const double spatial = m.coeff * pow_int(x, m.px) * pow_int(y, m.py) * pow_int(z, m.pz);
        phi(k, b) += d_dt ? (m.pt == 0 ? 0.0 : spatial * m.pt * pow_int(t, m.pt - 1))
                          : spatial * pow_int(t, m.pt);
      }
    }
  }
  return phi;
}

std::unique_ptr<EvalTape> LinearFieldModel::forward_batch(const Eigen::VectorXd& theta,
                                                          const Eigen::MatrixXd& X,
                                                          Eigen::MatrixXd& Y) const {
  check_theta(theta);
  auto tape = std::make_unique<LinearTape>();
  tape->phi_u = features(X, false, false);
  tape->phi_v = features(X, true, false);
  Y.resize(2, X.cols());
  Y.row(0) = theta.transpose() * tape->phi_u;
  Y.row(1) = theta.transpose() * tape->phi_v;
  return tape;
}

void LinearFieldModel::backward(const EvalTape& tape_in, const Eigen::MatrixXd& dY,
                                Eigen::VectorXd& grad) const {
  const auto& tape = dynamic_cast<const LinearTape&>(tape_in);
  grad.noalias() += tape.phi_u * dY.row(0).transpose();
  grad.noalias() += tape.phi_v * dY.row(1).transpose();
}

std::unique_ptr<EvalTape> LinearFieldModel::forward_dt_batch(const Eigen::VectorXd& theta,
                                                             const Eigen::MatrixXd& X,
                                                             Eigen::MatrixXd& Y,
                                                             Eigen::MatrixXd& Ydot) const {
  check_theta(theta);
  auto tape = std::make_unique<LinearTape>();
  tape->has_tangent = true;
  tape->phi_u = features(X, false, false);
  tape->phi_v = features(X, true, false);
  tape->phi_u_dot = features(X, false, true);
  tape->phi_v_dot = features(X, true, true);
  Y.resize(2, X.cols());
  Ydot.resize(2, X.cols());
  Y.row(0) = theta.transpose() * tape->phi_u;
  Y.row(1) = theta.transpose() * tape->phi_v;
  Ydot.row(0) = theta.transpose() * tape->phi_u_dot;
  Ydot.row(1) = theta.transpose() * tape->phi_v_dot;
  return tape;
}

void LinearFieldModel::backward_dt(const EvalTape& tape_in, const Eigen::MatrixXd& dY,
                                   const Eigen::MatrixXd& dYdot, Eigen::VectorXd& grad) const {
  const auto& tape = dynamic_cast<const LinearTape&>(tape_in);
  if (!tape.has_tangent)
    throw ConfigError("LinearFieldModel::backward_dt: tape lacks a tangent pass");
  grad.noalias() += tape.phi_u * dY.row(0).transpose();
  grad.noalias() += tape.phi_v * dY.row(1).transpose();
  grad.noalias() += tape.phi_u_dot * dYdot.row(0).transpose();
  grad.noalias() += tape.phi_v_dot * dYdot.row(1).transpose();
}

// ---------------------------------------------------------------------------
// Point-wise wrappers.

std::pair<double, double> forward(const FieldModel& model, const ParamVector& theta,
                                  const Eigen::Vector3d& coords, double t) {
  Eigen::MatrixXd X(4, 1);
  X << coords.x(), coords.y(), coords.z(), t;
  Eigen::MatrixXd Y;
  model.forward_batch(theta.values, X, Y);
  return {Y(0, 0), Y(1, 0)};
}

std::pair<double, double> dt_forward(const FieldModel& model, const ParamVector& theta,
                                     const Eigen::Vector3d& coords, double t) {
  Eigen::MatrixXd X(4, 1);
  X << coords.x(), coords.y(), coords.z(), t;
  Eigen::MatrixXd Y, Ydot;
  model.forward_dt_batch(theta.values, X, Y, Ydot);
  return {Ydot(0, 0), Ydot(1, 0)};
}

double grad_params(const FieldModel& model, const ParamVector& theta,
                   const Eigen::MatrixXd& X, const BatchObjective& objective,
                   Eigen::VectorXd& grad) {
  Eigen::MatrixXd Y;
  auto tape = model.forward_batch(theta.values, X, Y);
  if (!Y.allFinite())
    throw NumericalError("grad_params: non-finite model output during forward pass");
  Eigen::MatrixXd dY = Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
  const double value = objective(Y, dY);
  if (!std::isfinite(value))
    throw NumericalError("grad_params: objective value is non-finite");
  if (dY.rows() != Y.rows() || dY.cols() != Y.cols())
    throw ConfigError("grad_params: objective returned dY with wrong shape");
  grad = Eigen::VectorXd::Zero(model.param_count());
  model.backward(*tape, dY, grad);
  if (!grad.allFinite())
    throw NumericalError("grad_params: non-finite gradient after reverse sweep");
  return value;
}

// ---------------------------------------------------------------------------
// Checkpoints.

void save_checkpoint(const MlpFieldModel& model, const ParamVector& theta,
                     std::uint64_t init_seed, const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& extra) {
  namespace fs = std::filesystem;
  const fs::path ckpt(path);
  const fs::path params_file = ckpt.parent_path() / (ckpt.stem().string() + ".params.csv");
  nlohmann::json j;
  for (const auto& [key, value] : extra) j[key] = value;
  j["type"] = "mlp";
  j["layer_sizes"] = model.layer_sizes();
  j["scale_lo"] = {model.scale_lo()[0], model.scale_lo()[1], model.scale_lo()[2],
                   model.scale_lo()[3]};
  j["scale_hi"] = {model.scale_hi()[0], model.scale_hi()[1], model.scale_hi()[2],
                   model.scale_hi()[3]};
  j["init_seed"] = init_seed;
  j["params_file"] = params_file.filename().string();
  std::ofstream out(path);
  if (!out) throw ConfigError("save_checkpoint: cannot write " + path);
  out << j.dump(2) << "\n";
  std::ofstream pout(params_file);
  if (!pout) throw ConfigError("save_checkpoint: cannot write " + params_file.string());
  char buf[40];
  for (int i = 0; i < theta.length(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", theta.values[i]);
    pout << buf << "\n";
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  namespace fs = std::filesystem;
  std::ifstream in(path);
  if (!in) throw ConfigError("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("load_checkpoint: " + path + ": " + e.what());
  }
  if (j.value("type", "") != "mlp")
    throw ConfigError("load_checkpoint: unsupported checkpoint type in " + path);
  std::vector<int> sizes = j.at("layer_sizes").get<std::vector<int>>();
  Eigen::Vector4d lo, hi;
  for (int i = 0; i < 4; ++i) {
    lo[i] = j.at("scale_lo")[i].get<double>();
    hi[i] = j.at("scale_hi")[i].get<double>();
  }
  MlpFieldModel model(sizes, lo, hi);
  const fs::path params_file =
      fs::path(path).parent_path() / j.at("params_file").get<std::string>();
  std::ifstream pin(params_file);
  if (!pin) throw ConfigError("load_checkpoint: cannot open " + params_file.string());
  std::vector<double> values;
  std::string line;
  while (std::getline(pin, line)) {
    if (line.empty()) continue;
    values.push_back(std::stod(line));
  }
  if (static_cast<int>(values.size()) != model.param_count())
    throw ConfigError("load_checkpoint: parameter count mismatch in " + params_file.string());
  Checkpoint ckpt{std::move(model), {}, j.value("init_seed", std::uint64_t{0})};
  ckpt.theta.values = Eigen::Map<Eigen::VectorXd>(values.data(), values.size());
  return ckpt;
}

}  // namespace fossa
