#pragma once

#include <functional>

#include "koop/types.hpp"

namespace koop {

// Right-hand side of an ODE: dy/dt = f(y, t), written into `dy` (same size
// as `y`, preallocated by the integrator).
using VectorField = std::function<void(const Vector& y, double t, Vector& dy)>;

struct IntegratorConfig {
  double abs_tol = 1e-9;
  double rel_tol = 1e-7;
  double initial_step = 0.0;  // 0 = choose automatically
  double safety = 0.9;
  double min_factor = 0.2;    // step shrink clamp
  double max_factor = 5.0;    // step growth clamp
  Index max_steps = 100000;   // accepted+rejected attempts before giving up
};

struct IntegrationResult {
  Vector y;            // state at t1
  Index steps_accepted = 0;
  Index steps_rejected = 0;
};

// Adaptive Dormand-Prince 5(4) with FSAL.  Integrates from t0 to t1 in either
// direction.  A step is accepted when the weighted RMS of the embedded error
// estimate, with per-component scale abs_tol + rel_tol * |y|, is at most 1.
// Throws NumericalError when the state goes non-finite or the step budget is
// exhausted, naming the time reached.
IntegrationResult dopri54(const VectorField& f, const Vector& y0, double t0, double t1,
                          const IntegratorConfig& cfg = {});

// Fixed-step explicit Euler.  Returns the full trajectory as a
// dim x (steps + 1) matrix whose first column is y0.  Throws NumericalError,
// naming the step, if the state becomes non-finite (diverging stiff problems
// do this readily; callers may catch and treat it as a rejection).
Matrix euler_integrate(const VectorField& f, const Vector& y0, double dt, Index steps);

// Problem description for the adjoint method.  `f` drives the forward
// dynamics; the two pullbacks evaluate transposed-Jacobian products at an
// arbitrary (y, t):
//   vjp_state : out = (df/dy)^T a        (size state_dim)
//   vjp_params: out = (df/dtheta)^T a    (size param_dim)
// `fused`, when provided, computes f, -vjp_state and -vjp_params in one pass
// (an optimization hook for fields whose pullbacks share intermediates); it
// must agree with the individual callbacks.
struct AdjointField {
  Index state_dim = 0;
  Index param_dim = 0;
  VectorField f;
  std::function<void(const Vector& y, double t, const Vector& a, Vector& out)> vjp_state;
  std::function<void(const Vector& y, double t, const Vector& a, Vector& out)> vjp_params;
  std::function<void(const Vector& y, double t, const Vector& a, Vector& dy, Vector& da,
                     Vector& dg)>
      fused;
};

struct AdjointResult {
  Vector state_start;       // y(t_start) recovered by backward integration
  Vector grad_state_start;  // dJ/dy(t_start)
  Vector grad_params;       // dJ/dtheta accumulated over [t_start, t_end]
};

// Adjoint sensitivity pass.  Given the state at t_end and the cotangent
// a(t_end) = dJ/dy(t_end), integrates the augmented system
//   d/dt [y; a; g] = [f; -(df/dy)^T a; -(df/dtheta)^T a]
// backward from t_end to t_start with dopri54, so g(t_start) equals the
// integral of (df/dtheta)^T a over the whole span, i.e. the parameter
// gradient.  The forward state is replayed jointly; no checkpoints are kept.
AdjointResult adjoint_backward(const AdjointField& field, const Vector& state_end,
                               const Vector& cotangent_end, double t_start, double t_end,
                               const IntegratorConfig& cfg = {});

}  // namespace koop
