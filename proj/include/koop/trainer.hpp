#pragma once

#include <functional>
#include <ostream>

#include "koop/edmd.hpp"

namespace koop {

struct TrainConfig {
  Index dictionary_size = 25;  // M; the network output size is M - d - 1
  double lambda = 0.01;        // Tikhonov parameter, >= 0
  double epsilon = 30.0;       // stop when the summed loss J <= epsilon, > 0
  double learning_rate = 1e-3; // Adam delta, > 0
  Index max_epochs = 5000;
  Index inner_steps = 1;       // Adam steps per K update
  Index batch_size = 0;        // pairs per gradient step; 0 = full dataset
  std::uint64_t seed = 0;      // network init and mini-batch shuffling
  NetworkArch arch;            // input_dim/output_dim are filled from data
  IntegratorConfig node_integrator{};  // forward/adjoint tolerances (node only)
  double svd_cutoff = 1e-12;
  Index checkpoint_every = 0;  // invoke the checkpoint callback every k epochs
  Index log_every = 1;         // progress-line cadence when a log stream is given

  void validate() const;
};

struct TrainReport {
  std::vector<double> loss;             // J(theta_e, K_e), one entry per epoch
  std::vector<double> loss_pre_update;  // J(theta_e, K_{e-1}); NaN for epoch 1
  double final_loss = 0.0;
  Index epochs = 0;
  Index parameter_count = 0;
  double wall_seconds = 0.0;
  bool converged = false;  // stopped on J <= epsilon rather than max_epochs
  Index best_epoch = 0;    // epoch of the lowest recorded J
};

struct TrainOutput {
  Dictionary dictionary;
  KoopmanModel model;
  TrainReport report;
};

// Summed EDMD loss J = sum_n ||Psi(x_{n+1}) - K^T Psi(x_n)^T||^2 + lambda ||K||_F^2
// with the dictionary treated as a column vector inside the residual.
double loss_J(const Matrix& K, const Dictionary& dict, const TimeSeriesDataset& dataset,
              double lambda);

// Closed-form K update at fixed dictionary parameters: the exact minimizer of
// loss_J over K.  Because the Gram matrices average over the N pairs while
// the loss sums over them, the effective Tikhonov shift is lambda / N.
Matrix update_K(const Dictionary& dict, const TimeSeriesDataset& dataset, double lambda,
                double svd_cutoff = 1e-12);

// Called every `checkpoint_every` epochs and once at the end of training.
using CheckpointCallback =
    std::function<void(Index epoch, const Dictionary& dict, const Matrix& K)>;

// Alternating optimization: closed-form K update at fixed parameters, then
// Adam step(s) on the dictionary parameters at fixed K, until J <= epsilon or
// max_epochs.  On a max_epochs stop the best-so-far iterate is restored
// (report.converged = false).  A non-finite loss aborts with the recent loss
// trace in the message.  `log`, when given, receives one progress line per
// epoch.
TrainOutput train(const TrainConfig& config, const TimeSeriesDataset& dataset,
                  std::ostream* log = nullptr, const CheckpointCallback& checkpoint = {});

}  // namespace koop
