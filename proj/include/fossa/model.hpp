#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fossa/common.hpp"

namespace fossa {

// Flat trainable parameters.
struct ParamVector {
  Eigen::VectorXd values;

  int length() const { return static_cast<int>(values.size()); }
  void validate() const {
    if (!values.allFinite()) throw NumericalError("ParamVector: non-finite entries");
  }
};

// Per-call reverse-mode tape. forward_batch records whatever the concrete
// model needs for one backward sweep; tapes are never shared across calls.
class EvalTape {
public:
  virtual ~EvalTape() = default;
};

// Parametric field (u, v) over (x, y, z, t) with self-contained
// differentiation:
//   - reverse mode over the recorded batch for d(loss)/d(theta),
//   - forward mode in t for (du/dt, dv/dt), and a reverse sweep through
//     that tangent computation so losses may depend on time derivatives.
//
// Batches are 4 x B input matrices (rows x, y, z, t); outputs are 2 x B
// (rows u, v).
class FieldModel {
public:
  virtual ~FieldModel() = default;

  virtual int param_count() const = 0;
  virtual std::unique_ptr<FieldModel> clone() const = 0;

  virtual std::unique_ptr<EvalTape> forward_batch(const Eigen::VectorXd& theta,
                                                  const Eigen::MatrixXd& X,
                                                  Eigen::MatrixXd& Y) const = 0;
  // Accumulates d(loss)/d(theta) into grad given dY = d(loss)/dY.
  virtual void backward(const EvalTape& tape, const Eigen::MatrixXd& dY,
                        Eigen::VectorXd& grad) const = 0;

  virtual std::unique_ptr<EvalTape> forward_dt_batch(const Eigen::VectorXd& theta,
                                                     const Eigen::MatrixXd& X,
                                                     Eigen::MatrixXd& Y,
                                                     Eigen::MatrixXd& Ydot) const = 0;
  // Reverse sweep through the tangent-carrying pass; dYdot = d(loss)/dYdot.
  virtual void backward_dt(const EvalTape& tape, const Eigen::MatrixXd& dY,
                           const Eigen::MatrixXd& dYdot,
                           Eigen::VectorXd& grad) const = 0;

  void check_theta(const Eigen::VectorXd& theta) const {
    if (static_cast<int>(theta.size()) != param_count())
      throw ConfigError("FieldModel: theta length " + std::to_string(theta.size()) +
                        " does not match parameter count " + std::to_string(param_count()));
  }
};

// Fully connected tanh network on inputs scaled to [-1,1] per dimension.
// layer_sizes = {4, h_1, ..., h_k, 2}; identity output head.
class MlpFieldModel final : public FieldModel {
public:
  MlpFieldModel(std::vector<int> layer_sizes,
                Eigen::Vector4d scale_lo = Eigen::Vector4d::Constant(-1.0),
                Eigen::Vector4d scale_hi = Eigen::Vector4d::Constant(1.0));

  int param_count() const override { return param_count_; }
  std::unique_ptr<FieldModel> clone() const override {
    return std::make_unique<MlpFieldModel>(*this);
  }

  // Glorot-uniform weights in +-sqrt(6/(n_in+n_out)), zero biases; seeded.
  ParamVector init_params(std::uint64_t seed) const;

  std::unique_ptr<EvalTape> forward_batch(const Eigen::VectorXd& theta,
                                          const Eigen::MatrixXd& X,
                                          Eigen::MatrixXd& Y) const override;
  void backward(const EvalTape& tape, const Eigen::MatrixXd& dY,
                Eigen::VectorXd& grad) const override;
  std::unique_ptr<EvalTape> forward_dt_batch(const Eigen::VectorXd& theta,
                                             const Eigen::MatrixXd& X,
                                             Eigen::MatrixXd& Y,
                                             Eigen::MatrixXd& Ydot) const override;
  void backward_dt(const EvalTape& tape, const Eigen::MatrixXd& dY,
                   const Eigen::MatrixXd& dYdot, Eigen::VectorXd& grad) const override;

  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  const Eigen::Vector4d& scale_lo() const { return scale_lo_; }
  const Eigen::Vector4d& scale_hi() const { return scale_hi_; }

private:
  std::vector<int> layer_sizes_;
  Eigen::Vector4d scale_lo_, scale_hi_;
  int param_count_ = 0;

  int layer_count() const { return static_cast<int>(layer_sizes_.size()) - 1; }
  // Maps layer l (0-based) to (W, b) views into theta.
  Eigen::Map<const Eigen::MatrixXd> weight(const Eigen::VectorXd& theta, int l) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Eigen::VectorXd& theta, int l) const;
  Eigen::Map<Eigen::MatrixXd> weight_grad(Eigen::VectorXd& g, int l) const;
  Eigen::Map<Eigen::VectorXd> bias_grad(Eigen::VectorXd& g, int l) const;
  std::vector<int> layer_offsets_;
};

// c * x^px * y^py * z^pz * t^pt
struct Monomial {
  double coeff = 1.0;
  int px = 0, py = 0, pz = 0, pt = 0;
};

// Exactly linear in theta: u = sum_k theta_k * phi_u_k(x,t) with
// polynomial features (v analogous). Analytic oracle model for
// sensitivity tests; outputs are affine functions of theta so Hessians of
// squared-residual losses are exact constants.
class LinearFieldModel final : public FieldModel {
public:
  LinearFieldModel(std::vector<std::vector<Monomial>> u_basis,
                   std::vector<std::vector<Monomial>> v_basis);

  int param_count() const override { return static_cast<int>(u_basis_.size()); }
  std::unique_ptr<FieldModel> clone() const override {
    return std::make_unique<LinearFieldModel>(*this);
  }

  std::unique_ptr<EvalTape> forward_batch(const Eigen::VectorXd& theta,
                                          const Eigen::MatrixXd& X,
                                          Eigen::MatrixXd& Y) const override;
  void backward(const EvalTape& tape, const Eigen::MatrixXd& dY,
                Eigen::VectorXd& grad) const override;
  std::unique_ptr<EvalTape> forward_dt_batch(const Eigen::VectorXd& theta,
                                             const Eigen::MatrixXd& X,
                                             Eigen::MatrixXd& Y,
                                             Eigen::MatrixXd& Ydot) const override;
  void backward_dt(const EvalTape& tape, const Eigen::MatrixXd& dY,
                   const Eigen::MatrixXd& dYdot, Eigen::VectorXd& grad) const override;

  // Feature matrices at a batch (P x B): Phi, and its time derivative.
  Eigen::MatrixXd features(const Eigen::MatrixXd& X, bool v_channel, bool d_dt) const;

  const std::vector<std::vector<Monomial>>& u_basis() const { return u_basis_; }
  const std::vector<std::vector<Monomial>>& v_basis() const { return v_basis_; }

private:
  std::vector<std::vector<Monomial>> u_basis_, v_basis_;
};

// ---------------------------------------------------------------------------
// Point-wise convenience operations.

std::pair<double, double> forward(const FieldModel& model, const ParamVector& theta,
                                  const Eigen::Vector3d& coords, double t);

std::pair<double, double> dt_forward(const FieldModel& model, const ParamVector& theta,
                                     const Eigen::Vector3d& coords, double t);

// Scalar objective over a batch of model outputs: returns the value and
// fills dY = d(objective)/dY.
using BatchObjective = std::function<double(const Eigen::MatrixXd& Y, Eigen::MatrixXd& dY)>;

// Reverse-accumulation gradient of objective(model(theta, X)); returns the
// objective value and fills grad (resized, overwritten).
double grad_params(const FieldModel& model, const ParamVector& theta,
                   const Eigen::MatrixXd& X, const BatchObjective& objective,
                   Eigen::VectorXd& grad);

// ---------------------------------------------------------------------------
// MLP checkpoints: <path> is a JSON file (architecture, scaling bounds,
// seed, provenance) referencing a sibling CSV of parameter values.

struct Checkpoint {
  MlpFieldModel model;
  ParamVector theta;
  std::uint64_t init_seed = 0;
};

void save_checkpoint(const MlpFieldModel& model, const ParamVector& theta,
                     std::uint64_t init_seed, const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& extra = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fossa
