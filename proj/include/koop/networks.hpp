#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "koop/odeint.hpp"
#include "koop/types.hpp"

namespace koop {

enum class NetworkKind { mlp, node };

// Weight initialization scheme for the affine layers.  Both draw biases from
// U(-sqrt(l), sqrt(l)) where l is the hidden width; they differ in the weight
// range: `inverse` uses U(-1/sqrt(l), 1/sqrt(l)), `literal` uses
// U(-sqrt(l), sqrt(l)).
enum class InitScheme { inverse, literal };

struct NetworkArch {
  NetworkKind kind = NetworkKind::mlp;
  Index input_dim = 0;   // d, the state dimension
  Index output_dim = 0;  // number of trainable dictionary functions
  Index width = 0;       // hidden width: l for mlp, l' (latent) for node
  Index depth = 3;       // mlp only: number of hidden activation layers
  Index field_width = 0; // node only: width l'' of the latent vector field
  InitScheme init = InitScheme::inverse;
  double field_init_std = 0.1;  // node: W1..W3 entries ~ N(0, field_init_std^2)
  std::array<double, 2> time_span{0.0, 1.0};  // node: latent integration window
};

// Everything backward() needs from a matching forward() call.  Treat as
// opaque; contents depend on the network kind.
struct ForwardRecord {
  Matrix input;                // d x N batch the record was taken on
  std::vector<Matrix> hidden;  // mlp: h_1 .. h_depth
  Matrix state_end;            // node: latent state at the end of the span
  const void* owner = nullptr;
  std::uint64_t revision = 0;
};

// A trainable map R^d -> R^{output_dim} providing the learned part of a
// dictionary.  Parameters live in one flat vector with a fixed layout (see
// the concrete classes); gradients use the same layout.
class DictionaryNetwork {
 public:
  virtual ~DictionaryNetwork() = default;

  virtual const NetworkArch& arch() const = 0;
  virtual Index parameter_count() const = 0;
  virtual const Vector& parameters() const = 0;
  virtual void set_parameters(const Vector& theta) = 0;

  // Evaluates the batch X (d x N) to outputs (output_dim x N).  When `record`
  // is given, stores what the backward pass needs.
  virtual Matrix forward(const Matrix& X, ForwardRecord* record = nullptr) const = 0;

  // Gradient of sum_n <grad_output.col(n), net(x_n)> with respect to the flat
  // parameter vector.  `record` must come from a forward() on this object
  // with the current parameters; anything else throws InvalidInput.
  virtual Vector backward(const ForwardRecord& record, const Matrix& grad_output) const = 0;

  virtual std::unique_ptr<DictionaryNetwork> clone() const = 0;
};

// Residual multilayer perceptron:
//   h_1     = W_in x + b_in                      (no activation)
//   h_{t+1} = h_t + tanh(W_t h_t + b_t)          t = 1 .. depth-1
//   y       = W_out h_depth + b_out
// Flat layout: W_in, b_in, W_1, b_1, ..., W_{depth-1}, b_{depth-1},
// W_out, b_out; matrices stored column-major.
class MlpNetwork final : public DictionaryNetwork {
 public:
  MlpNetwork(const NetworkArch& arch, std::uint64_t seed);

  const NetworkArch& arch() const override { return arch_; }
  Index parameter_count() const override { return theta_.size(); }
  const Vector& parameters() const override { return theta_; }
  void set_parameters(const Vector& theta) override;
  Matrix forward(const Matrix& X, ForwardRecord* record = nullptr) const override;
  Vector backward(const ForwardRecord& record, const Matrix& grad_output) const override;
  std::unique_ptr<DictionaryNetwork> clone() const override;

 private:
  NetworkArch arch_;
  Vector theta_;
  std::uint64_t revision_ = 0;
};

// Neural-ODE dictionary:
//   h(t_s)  = W_in x + b_in
//   dh/dt   = W3 tanh(W2 tanh(W1 h))             (autonomous, bias-free)
//   y       = W_out h(t_e) + b_out
// The latent batch is integrated jointly with dopri54; gradients come from
// the adjoint sensitivity method, replaying the state backward alongside the
// adjoint (no stored checkpoints).
// Flat layout: W_in, b_in, W1, W2, W3, W_out, b_out; column-major matrices.
class NodeNetwork final : public DictionaryNetwork {
 public:
  NodeNetwork(const NetworkArch& arch, std::uint64_t seed);

  const NetworkArch& arch() const override { return arch_; }
  Index parameter_count() const override { return theta_.size(); }
  const Vector& parameters() const override { return theta_; }
  void set_parameters(const Vector& theta) override;
  Matrix forward(const Matrix& X, ForwardRecord* record = nullptr) const override;
  Vector backward(const ForwardRecord& record, const Matrix& grad_output) const override;
  std::unique_ptr<DictionaryNetwork> clone() const override;

  // Tolerances for both the forward latent integration and the backward
  // adjoint integration.
  void set_integrator(const IntegratorConfig& cfg) { ode_cfg_ = cfg; }
  const IntegratorConfig& integrator() const { return ode_cfg_; }

 private:
  // dH = W3 tanh(W2 tanh(W1 H)) on a column-chunked batch.
  void eval_field(const Matrix& H, Matrix& dH) const;

  NetworkArch arch_;
  Vector theta_;
  IntegratorConfig ode_cfg_;
  std::uint64_t revision_ = 0;
};

// Number of parameters the given architecture carries.
Index count_parameters(const NetworkArch& arch);

// Validates the architecture and builds an initialized network.  The draw
// order is fixed (flat layout order, column-major within each matrix), so a
// given (arch, seed) pair always yields the same parameters.
std::unique_ptr<DictionaryNetwork> make_network(const NetworkArch& arch, std::uint64_t seed);

// Adam optimizer with bias correction; epsilon sits outside the square root:
//   theta -= lr * m_hat / (sqrt(v_hat) + eps)
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Vector m, v;
  Index step = 0;
  void reset(Index n) {
    m = Vector::Zero(n);
    v = Vector::Zero(n);
    step = 0;
  }
};

void adam_step(Vector& theta, const Vector& grad, AdamState& state, const AdamConfig& cfg);

}  // namespace koop
