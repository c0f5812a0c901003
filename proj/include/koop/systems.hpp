#pragma once

#include "koop/dataset.hpp"
#include "koop/odeint.hpp"
#include "koop/types.hpp"

namespace koop {

// Damped Duffing oscillator  x1'' = -gamma x1' - x1 (beta + alpha x1^2),
// written as the first-order system (x1, x2) with x2 = x1'.  With the
// defaults every trajectory settles onto one of the equilibria (+-1, 0).
struct DuffingParams {
  double alpha = 1.0;
  double beta = -1.0;
  double gamma = 0.5;
  double dt = 0.25;  // sampling step, > 0
  IntegratorConfig ode{};

  void validate() const {
    if (!(dt > 0.0)) throw InvalidInput("duffing: dt must be positive");
  }
};

VectorField duffing_field(const DuffingParams& p);

// Advances one sampling step with dopri54.
Vector duffing_step(const DuffingParams& p, const Vector& state);

// steps applications of duffing_step; returns 2 x (steps + 1) incl. state0.
Matrix duffing_trajectory(const DuffingParams& p, const Vector& state0, Index steps);

// duffing_step applied to every column.
Matrix duffing_step_batch(const DuffingParams& p, const Matrix& states);

struct DuffingDatasetParams {
  Index n_trajectories = 1000;
  Index steps = 10;  // transitions per trajectory
  Box box = uniform_box(2, -2.0, 2.0);
};

// Uniform initial conditions on the box, one trajectory per IC,
// deterministic per seed (each trajectory draws from its own RNG stream).
TimeSeriesDataset generate_duffing_dataset(const DuffingParams& p,
                                           const DuffingDatasetParams& dp, std::uint64_t seed);

// Kuramoto-Sivashinsky equation  u_t = -u u_x - u_xx - u_xxxx  on a periodic
// grid, semi-discretized with central differences and advanced with explicit
// Euler.  The sampling interval dt is far beyond the Euler stability bound of
// the fourth-derivative stencil (dx^4/16 scale), so by default each interval
// is split into `substeps` Euler steps below that bound; substeps = 1
// integrates at the literal sampling step, whose divergence the dataset
// generator catches through its rejection policy.
struct KsParams {
  double length = 16.0;
  Index grid = 128;     // N_x; dx = length / grid
  double dt = 0.005;    // sampling step
  Index substeps = 0;   // Euler substeps per sampling step; 0 = stability-derived
  bool conservative = false;  // advection as -(u^2/2)_x instead of -u u_x

  double dx() const { return length / static_cast<double>(grid); }
  void validate() const {
    if (grid < 5 || !(length > 0.0) || !(dt > 0.0) || substeps < 0)
      throw InvalidInput("ks: need grid >= 5, length > 0, dt > 0, substeps >= 0");
  }
};

// Smallest substep count keeping the Euler step below 90% of the linear
// stability bound 2 / (16/dx^4 + 4/dx^2).
Index ks_substeps(const KsParams& p);

// Right-hand side -u u_x - u_xx - u_xxxx with periodic central differences:
// u_x 2-point, u_xx 3-point, u_xxxx 5-point (1, -4, 6, -4, 1)/dx^4.
Vector ks_rhs(const KsParams& p, const Vector& u);

VectorField ks_field(const KsParams& p);

// One sampling step: `substeps` explicit-Euler steps of size dt/substeps.
Vector ks_step(const KsParams& p, const Vector& u);

struct KsDatasetParams {
  Index n_trajectories = 100;
  Index steps = 100;
  double box_lo = -4.0, box_hi = 4.0;
  Index max_attempts = 1000;        // resampling attempts per trajectory
  double overflow_threshold = 1e6;  // |u|_inf beyond this counts as blow-up
};

// Uniform initial conditions on [box_lo, box_hi]^grid.  Trajectories that
// blow up (non-finite or beyond overflow_threshold) are rejected and
// resampled from a fresh RNG stream; the number of rejections is returned
// through `rejected` when non-null.
TimeSeriesDataset generate_ks_dataset(const KsParams& p, const KsDatasetParams& dp,
                                      std::uint64_t seed, Index* rejected = nullptr);

}  // namespace koop
