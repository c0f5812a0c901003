#include "koop/metrics.hpp"

#include <cmath>
#include <sstream>

namespace koop {

double reconstruction_error(const Matrix& actual, const Matrix& predicted) {
  if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols())
    throw InvalidInput("reconstruction_error: trajectory shapes differ");
  if (actual.cols() < 2)
    throw InvalidInput("reconstruction_error: trajectories need at least two states");

  const Index n = actual.cols() - 1;
  double acc = 0.0;
  for (Index s = 1; s <= n; ++s) acc += (actual.col(s) - predicted.col(s)).squaredNorm();
  return std::sqrt(acc / static_cast<double>(n));
}

NormalizedModel normalize_eigenfunctions(const KoopmanModel& model, const EvalConfig& cfg) {
  cfg.validate();
  if (!model.dictionary)
    throw InvalidInput("normalize_eigenfunctions: model has no dictionary");
  if (cfg.box.dim() != model.B.cols())
    throw InvalidInput("normalize_eigenfunctions: box dimension does not match the model");

  Rng rng = Rng::stream(cfg.seed, 0);
  const Matrix X = sample_box(cfg.box, cfg.samples, rng);
  const ComplexMatrix Phi = eigenfunctions_at(model, X);

  const Index m = Phi.rows();
  NormalizedModel out;
  out.model = model;
  out.norms.resize(m);

  for (Index j = 0; j < m; ++j) {
    const double a = Phi.row(j).cwiseAbs2().mean();
    out.norms(j) = a;
    if (!(a > 0.0)) {
      std::ostringstream msg;
      msg << "normalize_eigenfunctions: eigenfunction " << j
          << " vanishes on the sampling region (a = " << a << ")";
      throw NumericalError(msg.str());
    }
    const double scale = 1.0 / std::sqrt(a);
    out.model.right.col(j) *= scale;
    out.model.left.col(j) /= scale;  // keeps xi_j^* zeta_j = 1
  }
  // Modes follow the left vectors so mode-eigenfunction products (and thus
  // predictions) are unchanged.
  out.model.modes = model.B.transpose().cast<Complex>() * out.model.left.conjugate();

  Rng rng2 = Rng::stream(cfg.seed, 1);
  const Matrix X2 = sample_box(cfg.box, cfg.samples, rng2);
  const ComplexMatrix Phi2 = eigenfunctions_at(out.model, X2);
  out.recheck.resize(m);
  for (Index j = 0; j < m; ++j) {
    const double a2 = Phi2.row(j).cwiseAbs2().mean();
    out.recheck(j) = a2;
    if (a2 < 0.9 || a2 > 1.1) {
      std::ostringstream msg;
      msg << "normalize_eigenfunctions: fresh-sample norm of eigenfunction " << j << " is "
          << a2 << ", outside [0.9, 1.1]";
      throw NumericalError(msg.str());
    }
  }
  return out;
}

EigenfunctionError eigenfunction_error(const KoopmanModel& model, const BatchMap& truth_step,
                                       const EvalConfig& cfg) {
  cfg.validate();
  if (!model.dictionary) throw InvalidInput("eigenfunction_error: model has no dictionary");
  if (!truth_step) throw InvalidInput("eigenfunction_error: missing ground-truth stepper");

  Rng rng = Rng::stream(cfg.seed, 2);
  const Matrix X = sample_box(cfg.box, cfg.samples, rng);
  const Matrix FX = truth_step(X);
  if (FX.rows() != X.rows() || FX.cols() != X.cols())
    throw InvalidInput("eigenfunction_error: truth stepper changed the batch shape");

  const ComplexMatrix Phi = eigenfunctions_at(model, X);
  const ComplexMatrix PhiF = eigenfunctions_at(model, FX);

  const Index m = Phi.rows();
  EigenfunctionError out;
  out.per_eigenpair.resize(m);
  for (Index j = 0; j < m; ++j) {
    const ComplexVector resid =
        PhiF.row(j).transpose() - model.eigenvalues(j) * Phi.row(j).transpose();
    out.per_eigenpair(j) = std::sqrt(resid.cwiseAbs2().mean());
  }
  out.averaged = out.per_eigenpair.mean();
  return out;
}

BasinClassification classify_basins(const KoopmanModel& model, const BatchMap& truth_step,
                                    const Matrix& initial_conditions, const EvalConfig& cfg) {
  if (!model.dictionary) throw InvalidInput("classify_basins: model has no dictionary");
  if (!truth_step) throw InvalidInput("classify_basins: missing ground-truth stepper");
  if (initial_conditions.cols() < 1)
    throw InvalidInput("classify_basins: no initial conditions");
  if (cfg.horizon < 1) throw InvalidInput("classify_basins: horizon must be >= 1");

  const Index n = initial_conditions.cols();

  Matrix truth_state = initial_conditions;
  for (Index s = 0; s < cfg.horizon; ++s) truth_state = truth_step(truth_state);

  const Matrix pred_state = predict_state_at(model, initial_conditions, cfg.horizon);

  auto label = [&](double x1) {
    return std::abs(x1 - cfg.target_plus) <= std::abs(x1 - cfg.target_minus) ? +1 : -1;
  };

  BasinClassification out;
  out.initial_conditions = initial_conditions;
  out.truth.resize(static_cast<std::size_t>(n));
  out.predicted.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    out.truth[static_cast<std::size_t>(i)] = label(truth_state(0, i));
    out.predicted[static_cast<std::size_t>(i)] = label(pred_state(0, i));
    if (out.truth[static_cast<std::size_t>(i)] == out.predicted[static_cast<std::size_t>(i)])
      ++out.correct;
  }
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(n);
  return out;
}

SweepResult efficiency_sweep(const TrainConfig& base, const TimeSeriesDataset& dataset,
                             const std::vector<Index>& widths, const SweepMetric& metric,
                             double threshold, std::ostream* log) {
  if (widths.empty()) throw InvalidInput("efficiency_sweep: no widths given");
  if (!metric) throw InvalidInput("efficiency_sweep: missing metric");

  SweepResult out;
  for (const Index w : widths) {
    TrainConfig cfg = base;
    if (cfg.arch.kind == NetworkKind::node)
      cfg.arch.field_width = w;
    else
      cfg.arch.width = w;

    const TrainOutput trained = train(cfg, dataset, nullptr);
    SweepRow row;
    row.width = w;
    row.parameter_count = trained.report.parameter_count;
    row.final_loss = trained.report.final_loss;
    row.metric = metric(trained);
    row.meets_threshold = row.metric <= threshold;
    out.rows.push_back(row);
    if (log)
      (*log) << "width " << w << "  params " << row.parameter_count << "  metric "
             << row.metric << (row.meets_threshold ? "  (meets threshold)" : "") << "\n";

    if (row.meets_threshold &&
        (out.best_parameter_count < 0 || row.parameter_count < out.best_parameter_count)) {
      out.best_parameter_count = row.parameter_count;
      out.best_width = w;
    }
  }
  return out;
}

}  // namespace koop
