#include "koop/systems.hpp"

#include <cmath>
#include <sstream>

#include "koop/parallel.hpp"

namespace koop {

VectorField duffing_field(const DuffingParams& p) {
  const double alpha = p.alpha, beta = p.beta, gamma = p.gamma;
  return [alpha, beta, gamma](const Vector& y, double, Vector& dy) {
    dy(0) = y(1);
    dy(1) = -gamma * y(1) - y(0) * (beta + alpha * y(0) * y(0));
  };
}

Vector duffing_step(const DuffingParams& p, const Vector& state) {
  p.validate();
  if (state.size() != 2) throw InvalidInput("duffing_step: state must have dimension 2");
  return dopri54(duffing_field(p), state, 0.0, p.dt, p.ode).y;
}

Matrix duffing_trajectory(const DuffingParams& p, const Vector& state0, Index steps) {
  if (steps < 0) throw InvalidInput("duffing_trajectory: negative step count");
  Matrix traj(2, steps + 1);
  traj.col(0) = state0;
  for (Index s = 0; s < steps; ++s) traj.col(s + 1) = duffing_step(p, traj.col(s));
  return traj;
}

Matrix duffing_step_batch(const DuffingParams& p, const Matrix& states) {
  if (states.rows() != 2) throw InvalidInput("duffing_step_batch: states must have 2 rows");
  Matrix out(2, states.cols());
  for_each_chunk(states.cols(), 64, [&](Index, Index b, Index e) {
    for (Index j = b; j < e; ++j) out.col(j) = duffing_step(p, states.col(j));
  });
  return out;
}

TimeSeriesDataset generate_duffing_dataset(const DuffingParams& p,
                                           const DuffingDatasetParams& dp, std::uint64_t seed) {
  p.validate();
  dp.box.validate();
  if (dp.n_trajectories < 1 || dp.steps < 1)
    throw InvalidInput("duffing dataset: need at least one trajectory and one step");

  TimeSeriesDataset ds;
  ds.state_dim = 2;
  ds.seed = seed;
  ds.system = {{"name", "duffing"},
               {"alpha", p.alpha},
               {"beta", p.beta},
               {"gamma", p.gamma},
               {"dt", p.dt},
               {"abs_tol", p.ode.abs_tol},
               {"rel_tol", p.ode.rel_tol},
               {"box_lo", dp.box.lo(0)},
               {"box_hi", dp.box.hi(0)}};
  ds.trajectories.resize(static_cast<std::size_t>(dp.n_trajectories));

  for_each_chunk(dp.n_trajectories, 16, [&](Index, Index b, Index e) {
    for (Index t = b; t < e; ++t) {
      Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(t));
      Vector x0(2);
      x0(0) = rng.uniform(dp.box.lo(0), dp.box.hi(0));
      x0(1) = rng.uniform(dp.box.lo(1), dp.box.hi(1));
      ds.trajectories[static_cast<std::size_t>(t)] = duffing_trajectory(p, x0, dp.steps);
    }
  });
  return ds;
}

// ---------------------------------------------------------------------------
// Kuramoto-Sivashinsky

Index ks_substeps(const KsParams& p) {
  const double dx = p.dx();
  const double spectral_bound = 16.0 / std::pow(dx, 4) + 4.0 / (dx * dx);
  const double h_max = 0.9 * 2.0 / spectral_bound;
  return std::max<Index>(1, static_cast<Index>(std::ceil(p.dt / h_max)));
}

Vector ks_rhs(const KsParams& p, const Vector& u) {
  p.validate();
  const Index n = p.grid;
  if (u.size() != n) throw InvalidInput("ks_rhs: grid size mismatch");

  const double dx = p.dx();
  const double inv_2dx = 1.0 / (2.0 * dx);
  const double inv_dx2 = 1.0 / (dx * dx);
  const double inv_dx4 = 1.0 / (dx * dx * dx * dx);

  Vector out(n);
  for (Index i = 0; i < n; ++i) {
    const Index im2 = (i - 2 + n) % n, im1 = (i - 1 + n) % n;
    const Index ip1 = (i + 1) % n, ip2 = (i + 2) % n;

    const double uxx = (u(ip1) - 2.0 * u(i) + u(im1)) * inv_dx2;
    const double uxxxx =
        (u(im2) - 4.0 * u(im1) + 6.0 * u(i) - 4.0 * u(ip1) + u(ip2)) * inv_dx4;
    const double advection = p.conservative
                                 ? (u(ip1) * u(ip1) - u(im1) * u(im1)) * 0.5 * inv_2dx
                                 : u(i) * (u(ip1) - u(im1)) * inv_2dx;
    out(i) = -advection - uxx - uxxxx;
  }
  return out;
}

VectorField ks_field(const KsParams& p) {
  return [p](const Vector& y, double, Vector& dy) { dy = ks_rhs(p, y); };
}

Vector ks_step(const KsParams& p, const Vector& u) {
  p.validate();
  const Index substeps = p.substeps > 0 ? p.substeps : ks_substeps(p);
  const double h = p.dt / static_cast<double>(substeps);
  const Matrix traj = euler_integrate(ks_field(p), u, h, substeps);
  return traj.col(substeps);
}

TimeSeriesDataset generate_ks_dataset(const KsParams& p, const KsDatasetParams& dp,
                                      std::uint64_t seed, Index* rejected) {
  p.validate();
  if (dp.n_trajectories < 1 || dp.steps < 1)
    throw InvalidInput("ks dataset: need at least one trajectory and one step");
  if (!(dp.box_lo < dp.box_hi)) throw InvalidInput("ks dataset: box_lo must be < box_hi");
  if (dp.max_attempts < 1) throw InvalidInput("ks dataset: max_attempts must be >= 1");

  const Index substeps = p.substeps > 0 ? p.substeps : ks_substeps(p);

  TimeSeriesDataset ds;
  ds.state_dim = p.grid;
  ds.seed = seed;
  ds.system = {{"name", "ks"},
               {"length", p.length},
               {"grid", p.grid},
               {"dt", p.dt},
               {"substeps", substeps},
               {"conservative", p.conservative},
               {"box_lo", dp.box_lo},
               {"box_hi", dp.box_hi}};
  ds.trajectories.resize(static_cast<std::size_t>(dp.n_trajectories));

  std::vector<Index> rejects(static_cast<std::size_t>(dp.n_trajectories), 0);

  for_each_chunk(dp.n_trajectories, 4, [&](Index, Index b, Index e) {
    for (Index t = b; t < e; ++t) {
      bool accepted = false;
      for (Index attempt = 0; attempt < dp.max_attempts && !accepted; ++attempt) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(t) *
                                        static_cast<std::uint64_t>(dp.max_attempts) +
                                    static_cast<std::uint64_t>(attempt));
        Vector u(p.grid);
        for (Index i = 0; i < p.grid; ++i) u(i) = rng.uniform(dp.box_lo, dp.box_hi);

        Matrix traj(p.grid, dp.steps + 1);
        traj.col(0) = u;
        bool ok = true;
        for (Index s = 0; s < dp.steps && ok; ++s) {
          try {
            traj.col(s + 1) = ks_step(p, traj.col(s));
          } catch (const NumericalError&) {
            ok = false;
          }
          if (ok && traj.col(s + 1).cwiseAbs().maxCoeff() > dp.overflow_threshold) ok = false;
        }
        if (ok) {
          ds.trajectories[static_cast<std::size_t>(t)] = std::move(traj);
          accepted = true;
        } else {
          ++rejects[static_cast<std::size_t>(t)];
        }
      }
      if (!accepted) {
        std::ostringstream msg;
        msg << "ks dataset: trajectory " << t << " kept blowing up after " << dp.max_attempts
            << " attempts (dt " << p.dt << ", substeps " << substeps
            << "); increase substeps or shrink dt";
        throw NumericalError(msg.str());
      }
    }
  });

  if (rejected) {
    *rejected = 0;
    for (const Index r : rejects) *rejected += r;
  }
  return ds;
}

}  // namespace koop
