#pragma once

#include <functional>
#include <ostream>

#include "koop/edmd.hpp"
#include "koop/trainer.hpp"

namespace koop {

// Ground-truth single-step map applied columnwise to a batch of states.
using BatchMap = std::function<Matrix(const Matrix&)>;

struct EvalConfig {
  Index samples = 10000;       // Monte-Carlo sample count I
  Box box;                     // sampling region
  std::uint64_t seed = 0;
  Index horizon = 49;          // classification step index
  double target_plus = 1.0;    // classification reference states on coordinate 0
  double target_minus = -1.0;

  void validate() const {
    if (samples < 1) throw InvalidInput("eval config: samples must be positive");
    box.validate();
  }
};

// Root mean squared state error over steps 1..N (the shared initial point is
// excluded): sqrt((1/N) sum_n ||actual(n) - predicted(n)||^2).  Symmetric in
// its arguments.
double reconstruction_error(const Matrix& actual, const Matrix& predicted);

// Rescales each eigenfunction phi_j to unit L2 norm under the uniform measure
// on cfg.box, estimated from cfg.samples Monte-Carlo points: zeta_j is scaled
// by 1/sqrt(a_j) with a_j = (1/I) sum |phi_j|^2, and xi_j counter-scaled so
// biorthogonality and the mode-eigenfunction products (hence predictions) are
// unchanged.  A vanishing a_j throws, naming j; a fresh-sample re-estimate
// outside [0.9, 1.1] also throws.
struct NormalizedModel {
  KoopmanModel model;
  Vector norms;      // a_j estimated on the scaling samples
  Vector recheck;    // a_j re-estimated on fresh samples after scaling
};
NormalizedModel normalize_eigenfunctions(const KoopmanModel& model, const EvalConfig& cfg);

// Per-eigenpair residual E_j = sqrt((1/I) sum_i |phi_j(F(x_i)) - mu_j phi_j(x_i)|^2)
// and the average E_eigen = (1/M) sum_j E_j.  The same sample set is shared
// across j.  The model should be normalized first.
struct EigenfunctionError {
  Vector per_eigenpair;
  double averaged = 0.0;
};
EigenfunctionError eigenfunction_error(const KoopmanModel& model, const BatchMap& truth_step,
                                       const EvalConfig& cfg);

// Labels each initial condition by whether the first state coordinate at the
// classification horizon lands closer to target_plus or target_minus, both
// for the model prediction and for the ground truth rollout, and reports the
// agreement.
struct BasinClassification {
  Matrix initial_conditions;      // d x N as given
  std::vector<int> truth;         // +1 / -1
  std::vector<int> predicted;     // +1 / -1
  Index correct = 0;
  double accuracy = 0.0;
};
BasinClassification classify_basins(const KoopmanModel& model, const BatchMap& truth_step,
                                    const Matrix& initial_conditions, const EvalConfig& cfg);

// Trains one dictionary per architecture variant and evaluates a caller
// metric; reports (parameter count, metric) rows and which variants meet the
// threshold.  `widths` are node field widths l'' or mlp hidden widths l,
// applied onto the base config's architecture.
struct SweepRow {
  Index width = 0;
  Index parameter_count = 0;
  double metric = 0.0;
  double final_loss = 0.0;
  bool meets_threshold = false;
};
struct SweepResult {
  std::vector<SweepRow> rows;
  Index best_width = -1;  // smallest parameter count meeting the threshold
  Index best_parameter_count = -1;
};
using SweepMetric = std::function<double(const TrainOutput&)>;
SweepResult efficiency_sweep(const TrainConfig& base, const TimeSeriesDataset& dataset,
                             const std::vector<Index>& widths, const SweepMetric& metric,
                             double threshold, std::ostream* log = nullptr);

}  // namespace koop
