#include "koop/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace koop {

namespace {

// Dormand-Prince 5(4) tableau.  Stage 7 equals the 5th-order solution (FSAL).
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;

// 5th-order minus embedded 4th-order weights (error estimator).
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

double weighted_rms(const Vector& v, const Vector& scale) {
  if (v.size() == 0) return 0.0;
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double q = v(i) / scale(i);
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

[[noreturn]] void fail_at(const char* what, double t) {
  std::ostringstream msg;
  msg << "dopri54: " << what << " (last reached time t = " << t << ")";
  throw NumericalError(msg.str());
}

// Starting step size heuristic of Hairer, Norsett and Wanner.
double initial_step(const VectorField& f, const Vector& y0, const Vector& f0, double t0,
                    double dir, double span, const IntegratorConfig& cfg) {
  const Index n = y0.size();
  Vector scale(n);
  for (Index i = 0; i < n; ++i) scale(i) = cfg.abs_tol + cfg.rel_tol * std::abs(y0(i));

  const double d0 = weighted_rms(y0, scale);
  const double d1 = weighted_rms(f0, scale);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);

  Vector y1 = y0 + (dir * h0) * f0;
  Vector f1(n);
  f(y1, t0 + dir * h0, f1);

  const double d2 = weighted_rms(f1 - f0, scale) / h0;
  double h1;
  if (std::max(d1, d2) <= 1e-15)
    h1 = std::max(1e-6, h0 * 1e-3);
  else
    h1 = std::pow(0.01 / std::max(d1, d2), 0.2);

  return std::min({100.0 * h0, h1, span});
}

}  // namespace

IntegrationResult dopri54(const VectorField& f, const Vector& y0, double t0, double t1,
                          const IntegratorConfig& cfg) {
  if (y0.size() == 0) throw InvalidInput("dopri54: empty initial state");
  if (!(cfg.abs_tol > 0.0) || !(cfg.rel_tol >= 0.0))
    throw InvalidInput("dopri54: tolerances must be positive");

  IntegrationResult res;
  res.y = y0;
  if (t0 == t1) return res;

  const Index n = y0.size();
  const double dir = t1 > t0 ? 1.0 : -1.0;

  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  Vector ytmp(n), ynew(n), yerr(n), scale(n);

  double t = t0;
  f(res.y, t, k1);
  if (!k1.allFinite()) fail_at("vector field returned non-finite values", t);

  double h = cfg.initial_step > 0.0
                 ? std::min(cfg.initial_step, std::abs(t1 - t0))
                 : initial_step(f, res.y, k1, t0, dir, std::abs(t1 - t0), cfg);

  for (Index attempt = 0; attempt < cfg.max_steps; ++attempt) {
    const double remaining = std::abs(t1 - t);
    const bool final_step = h >= remaining;
    if (final_step) h = remaining;
    const double hs = dir * h;

    ytmp = res.y + hs * (a21 * k1);
    f(ytmp, t + c2 * hs, k2);
    ytmp = res.y + hs * (a31 * k1 + a32 * k2);
    f(ytmp, t + c3 * hs, k3);
    ytmp = res.y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    f(ytmp, t + c4 * hs, k4);
    ytmp = res.y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(ytmp, t + c5 * hs, k5);
    ytmp = res.y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(ytmp, t + hs, k6);
    ynew = res.y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(ynew, t + hs, k7);

    if (!ynew.allFinite() || !k7.allFinite()) fail_at("state became non-finite", t);

    yerr = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    for (Index i = 0; i < n; ++i)
      scale(i) = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(res.y(i)), std::abs(ynew(i)));
    const double err = weighted_rms(yerr, scale);

    double factor = err > 0.0 ? cfg.safety * std::pow(err, -0.2) : cfg.max_factor;
    factor = std::clamp(factor, cfg.min_factor, cfg.max_factor);

    if (err <= 1.0) {
      t = final_step ? t1 : t + hs;
      res.y.swap(ynew);
      k1.swap(k7);  // FSAL: last stage is the first stage of the next step
      ++res.steps_accepted;
      if (final_step) return res;
      h *= factor;
    } else {
      ++res.steps_rejected;
      h *= std::min(factor, 1.0);
      if (!(h > 0.0)) fail_at("step size underflowed", t);
    }
  }

  fail_at("step budget exhausted", t);
}

Matrix euler_integrate(const VectorField& f, const Vector& y0, double dt, Index steps) {
  if (y0.size() == 0) throw InvalidInput("euler_integrate: empty initial state");
  if (steps < 0) throw InvalidInput("euler_integrate: negative step count");

  Matrix traj(y0.size(), steps + 1);
  traj.col(0) = y0;
  Vector dy(y0.size());
  for (Index s = 0; s < steps; ++s) {
    f(traj.col(s), static_cast<double>(s) * dt, dy);
    traj.col(s + 1) = traj.col(s) + dt * dy;
    if (!traj.col(s + 1).allFinite()) {
      std::ostringstream msg;
      msg << "euler_integrate: state became non-finite at step " << s + 1 << " of " << steps;
      throw NumericalError(msg.str());
    }
  }
  return traj;
}

AdjointResult adjoint_backward(const AdjointField& field, const Vector& state_end,
                               const Vector& cotangent_end, double t_start, double t_end,
                               const IntegratorConfig& cfg) {
  const Index nh = field.state_dim;
  const Index np = field.param_dim;
  if (state_end.size() != nh)
    throw InvalidInput("adjoint_backward: state size does not match field.state_dim");
  if (cotangent_end.size() != nh)
    throw InvalidInput("adjoint_backward: cotangent size does not match the state size");
  if (!field.f || !field.vjp_state || (np > 0 && !field.vjp_params && !field.fused))
    throw InvalidInput("adjoint_backward: field callbacks are incomplete");

  // Augmented state z = [y; a; g] with g(t) accumulating the parameter
  // gradient from t_end down to t.
  Vector z0(nh + nh + np);
  z0.head(nh) = state_end;
  z0.segment(nh, nh) = cotangent_end;
  z0.tail(np).setZero();

  VectorField aug;
  if (field.fused) {
    aug = [&field, nh, np](const Vector& z, double t, Vector& dz) {
      const Vector y = z.head(nh);
      const Vector a = z.segment(nh, nh);
      Vector dy(nh), da(nh), dg(np);
      field.fused(y, t, a, dy, da, dg);
      dz.head(nh) = dy;
      dz.segment(nh, nh) = da;
      dz.tail(np) = dg;
    };
  } else {
    aug = [&field, nh, np](const Vector& z, double t, Vector& dz) {
      const Vector y = z.head(nh);
      const Vector a = z.segment(nh, nh);
      Vector dy(nh), da(nh);
      field.f(y, t, dy);
      field.vjp_state(y, t, a, da);
      dz.head(nh) = dy;
      dz.segment(nh, nh) = -da;
      if (np > 0) {
        Vector dg(np);
        field.vjp_params(y, t, a, dg);
        dz.tail(np) = -dg;
      }
    };
  }

  const Vector z1 = dopri54(aug, z0, t_end, t_start, cfg).y;

  AdjointResult out;
  out.state_start = z1.head(nh);
  out.grad_state_start = z1.segment(nh, nh);
  out.grad_params = z1.tail(np);
  return out;
}

}  // namespace koop
