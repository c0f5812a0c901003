#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "koop/odeint.hpp"

using namespace koop;

namespace {

const VectorField decay = [](const Vector& y, double, Vector& dy) { dy = -y; };

const VectorField harmonic = [](const Vector& y, double, Vector& dy) {
  dy.resize(2);
  dy(0) = y(1);
  dy(1) = -y(0);
};

Vector scalar(double v) {
  Vector y(1);
  y(0) = v;
  return y;
}

}  // namespace

TEST_CASE("exponential decay reaches e^-1 within tolerance") {
  const IntegrationResult r = dopri54(decay, scalar(1.0), 0.0, 1.0);
  CHECK(std::abs(r.y(0) - std::exp(-1.0)) < 1e-7);
  CHECK(r.steps_accepted > 0);
}

TEST_CASE("constant field integrates exactly") {
  const VectorField f = [](const Vector&, double, Vector& dy) {
    dy.resize(2);
    dy(0) = 2.0;
    dy(1) = -1.0;
  };
  Vector y0(2);
  y0 << 1.0, 1.0;
  const IntegrationResult r = dopri54(f, y0, 0.0, 3.0);
  CHECK(r.y(0) == doctest::Approx(7.0).epsilon(1e-13));
  CHECK(r.y(1) == doctest::Approx(-2.0).epsilon(1e-13));
}

TEST_CASE("harmonic oscillator conserves energy over one period") {
  Vector y0(2);
  y0 << 1.0, 0.0;
  const double period = 2.0 * 3.14159265358979323846;
  const IntegrationResult r = dopri54(harmonic, y0, 0.0, period);
  const double e0 = 0.5 * y0.squaredNorm();
  const double e1 = 0.5 * r.y.squaredNorm();
  CHECK(std::abs(e1 - e0) < 1e-6);
  CHECK(std::abs(r.y(0) - 1.0) < 1e-5);
  CHECK(std::abs(r.y(1)) < 1e-5);
}

TEST_CASE("error decreases as tolerances tighten") {
  double prev_err = 1.0;
  for (double tol : {1e-5, 1e-7, 1e-9}) {
    IntegratorConfig cfg;
    cfg.abs_tol = tol;
    cfg.rel_tol = tol;
    const IntegrationResult r = dopri54(decay, scalar(1.0), 0.0, 1.0, cfg);
    const double err = std::abs(r.y(0) - std::exp(-1.0));
    CHECK(err <= prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 1e-8);
}

TEST_CASE("backward integration inverts forward integration") {
  Vector y0(2);
  y0 << 0.3, -0.7;
  IntegratorConfig cfg;
  const IntegrationResult fwd = dopri54(harmonic, y0, 0.0, 2.5, cfg);
  const IntegrationResult back = dopri54(harmonic, fwd.y, 2.5, 0.0, cfg);
  const double bound = 10.0 * (cfg.abs_tol + cfg.rel_tol * y0.norm());
  CHECK((back.y - y0).norm() <= bound);
}

TEST_CASE("integration over an empty span is the identity") {
  const IntegrationResult r = dopri54(decay, scalar(2.0), 1.0, 1.0);
  CHECK(r.y(0) == 2.0);
  CHECK(r.steps_accepted == 0);
}

TEST_CASE("step budget exhaustion names the time reached") {
  IntegratorConfig cfg;
  cfg.max_steps = 3;
  CHECK_THROWS_AS(dopri54(harmonic, Vector::Ones(2), 0.0, 1000.0, cfg), NumericalError);
}

TEST_CASE("non-finite states abort with an error") {
  const VectorField blow = [](const Vector& y, double, Vector& dy) {
    dy = y.array().square().matrix();  // finite-time blow-up for y0 > 0
  };
  CHECK_THROWS_AS(dopri54(blow, scalar(1.0), 0.0, 10.0), NumericalError);
}

TEST_CASE("respects an explicit initial step suggestion") {
  IntegratorConfig cfg;
  cfg.initial_step = 1e-3;
  const IntegrationResult r = dopri54(decay, scalar(1.0), 0.0, 1.0, cfg);
  CHECK(std::abs(r.y(0) - std::exp(-1.0)) < 1e-7);
}

TEST_CASE("euler trajectory of a constant field is an arithmetic ramp") {
  const VectorField one = [](const Vector&, double, Vector& dy) { dy.setOnes(1); };
  const Matrix traj = euler_integrate(one, scalar(0.0), 0.5, 4);
  REQUIRE(traj.rows() == 1);
  REQUIRE(traj.cols() == 5);
  for (Index s = 0; s <= 4; ++s) CHECK(traj(0, s) == doctest::Approx(0.5 * s).epsilon(1e-15));
}

TEST_CASE("euler decay matches the geometric closed form") {
  const Matrix traj = euler_integrate(decay, scalar(1.0), 0.1, 10);
  CHECK(traj(0, 10) == doctest::Approx(std::pow(0.9, 10)).epsilon(1e-15));
  CHECK(traj(0, 10) == doctest::Approx(0.3486784401).epsilon(1e-12));
}

TEST_CASE("euler names the step where the state diverges") {
  const VectorField blow = [](const Vector& y, double, Vector& dy) { dy = 1e155 * y; };
  CHECK_THROWS_AS(euler_integrate(blow, scalar(1.0), 1.0, 5), NumericalError);
  try {
    euler_integrate(blow, scalar(1.0), 1.0, 5);
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("adjoint of a zero field is the identity pullback") {
  AdjointField field;
  field.state_dim = 3;
  field.param_dim = 2;
  field.f = [](const Vector& y, double, Vector& dy) { dy = Vector::Zero(y.size()); };
  field.vjp_state = [](const Vector&, double, const Vector&, Vector& out) {
    out = Vector::Zero(3);
  };
  field.vjp_params = [](const Vector&, double, const Vector&, Vector& out) {
    out = Vector::Zero(2);
  };
  Vector yT(3), aT(3);
  yT << 1, 2, 3;
  aT << 4, 5, 6;
  const AdjointResult r = adjoint_backward(field, yT, aT, 0.0, 1.0);
  CHECK((r.state_start - yT).norm() < 1e-12);
  CHECK((r.grad_state_start - aT).norm() < 1e-12);
  CHECK(r.grad_params.norm() < 1e-12);
}

TEST_CASE("adjoint gradients of scalar exponential growth both equal e^theta") {
  // dy/dt = theta y with y(0) = 1, loss = y(1):
  // dL/dy(0) = e^theta and dL/dtheta = e^theta.
  const double theta = 0.5;
  AdjointField field;
  field.state_dim = 1;
  field.param_dim = 1;
  field.f = [theta](const Vector& y, double, Vector& dy) { dy = theta * y; };
  field.vjp_state = [theta](const Vector&, double, const Vector& a, Vector& out) {
    out = theta * a;
  };
  field.vjp_params = [](const Vector& y, double, const Vector& a, Vector& out) {
    out.resize(1);
    out(0) = y(0) * a(0);
  };

  const Vector yT = scalar(std::exp(theta));
  const AdjointResult r = adjoint_backward(field, yT, scalar(1.0), 0.0, 1.0);
  CHECK(r.state_start(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.grad_state_start(0) == doctest::Approx(std::exp(theta)).epsilon(1e-6));
  CHECK(r.grad_params(0) == doctest::Approx(std::exp(theta)).epsilon(1e-6));
}

TEST_CASE("fused adjoint callback agrees with the separate pullbacks") {
  const double theta = -0.8;
  AdjointField field;
  field.state_dim = 1;
  field.param_dim = 1;
  field.f = [theta](const Vector& y, double, Vector& dy) { dy = theta * y; };
  field.vjp_state = [theta](const Vector&, double, const Vector& a, Vector& out) {
    out = theta * a;
  };
  field.vjp_params = [](const Vector& y, double, const Vector& a, Vector& out) {
    out.resize(1);
    out(0) = y(0) * a(0);
  };
  AdjointField fused = field;
  fused.fused = [theta](const Vector& y, double, const Vector& a, Vector& dy, Vector& da,
                        Vector& dg) {
    dy = theta * y;
    da = -theta * a;
    dg.resize(1);
    dg(0) = -y(0) * a(0);
  };

  const Vector yT = scalar(2.0 * std::exp(theta));
  const AdjointResult a = adjoint_backward(field, yT, scalar(1.0), 0.0, 1.0);
  const AdjointResult b = adjoint_backward(fused, yT, scalar(1.0), 0.0, 1.0);
  CHECK((a.state_start - b.state_start).norm() < 1e-12);
  CHECK((a.grad_state_start - b.grad_state_start).norm() < 1e-12);
  CHECK((a.grad_params - b.grad_params).norm() < 1e-12);
}
