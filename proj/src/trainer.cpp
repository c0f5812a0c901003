#include "koop/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "koop/parallel.hpp"

namespace koop {

void TrainConfig::validate() const {
  if (lambda < 0.0) throw InvalidInput("train config: lambda must be >= 0");
  if (!(epsilon > 0.0)) throw InvalidInput("train config: epsilon must be > 0");
  if (!(learning_rate > 0.0)) throw InvalidInput("train config: learning rate must be > 0");
  if (max_epochs < 1) throw InvalidInput("train config: max_epochs must be >= 1");
  if (inner_steps < 1) throw InvalidInput("train config: inner_steps must be >= 1");
  if (batch_size < 0) throw InvalidInput("train config: batch_size must be >= 0");
  if (dictionary_size < 1) throw InvalidInput("train config: dictionary size must be >= 1");
}

namespace {

void gather_pairs(const Matrix& Psi, const std::vector<Index>& first,
                  const std::vector<Index>& second, Matrix& Psi0, Matrix& Psi1) {
  const Index n = static_cast<Index>(first.size());
  Psi0.resize(Psi.rows(), n);
  Psi1.resize(Psi.rows(), n);
  for (Index i = 0; i < n; ++i) {
    Psi0.col(i) = Psi.col(first[static_cast<std::size_t>(i)]);
    Psi1.col(i) = Psi.col(second[static_cast<std::size_t>(i)]);
  }
}

double loss_from(const Matrix& Psi0, const Matrix& Psi1, const Matrix& K, double lambda) {
  const Matrix R = Psi1 - gemm_cols(K.transpose(), Psi0);
  return R.squaredNorm() + lambda * K.squaredNorm();
}

}  // namespace

double loss_J(const Matrix& K, const Dictionary& dict, const TimeSeriesDataset& dataset,
              double lambda) {
  if (K.rows() != dict.size() || K.cols() != dict.size())
    throw InvalidInput("loss_J: K must be M x M for the dictionary size M");
  if (lambda < 0.0) throw InvalidInput("loss_J: lambda must be >= 0");

  const Matrix Psi = dict.evaluate(dataset.snapshots());
  std::vector<Index> first, second;
  dataset.pair_indices(first, second);
  Matrix Psi0, Psi1;
  gather_pairs(Psi, first, second, Psi0, Psi1);
  return loss_from(Psi0, Psi1, K, lambda);
}

Matrix update_K(const Dictionary& dict, const TimeSeriesDataset& dataset, double lambda,
                double svd_cutoff) {
  const GramPair gram = compute_gram(dict, dataset);
  return compute_K(gram.G, gram.A, lambda / static_cast<double>(dataset.pair_count()),
                   svd_cutoff);
}

TrainOutput train(const TrainConfig& config, const TimeSeriesDataset& dataset,
                  std::ostream* log, const CheckpointCallback& checkpoint) {
  config.validate();
  dataset.validate();

  const Index d = dataset.state_dim;
  const Index m = config.dictionary_size;
  const Index m_train = m - d - 1;
  if (m_train < 1)
    throw InvalidInput("train: dictionary size must exceed the state dimension plus one");

  NetworkArch arch = config.arch;
  arch.input_dim = d;
  arch.output_dim = m_train;

  std::unique_ptr<DictionaryNetwork> net = make_network(arch, config.seed);
  if (auto* node = dynamic_cast<NodeNetwork*>(net.get()))
    node->set_integrator(config.node_integrator);
  Dictionary dict(d, std::move(net));

  const Matrix S = dataset.snapshots();
  std::vector<Index> first, second;
  dataset.pair_indices(first, second);
  const Index n_pairs = static_cast<Index>(first.size());
  const double lambda_eff = config.lambda / static_cast<double>(n_pairs);

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.learning_rate;
  AdamState adam;
  Vector theta = dict.network().parameters();

  TrainReport report;
  report.parameter_count = dict.network().parameter_count();

  Matrix K;
  double best_loss = std::numeric_limits<double>::infinity();
  Vector best_theta = theta;
  Matrix best_K;
  Index best_epoch = 0;

  Rng shuffle_rng = Rng::stream(config.seed, 0x5ba7c4);

  const auto t_begin = std::chrono::steady_clock::now();

  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    ForwardRecord record;
    const Matrix Psi = dict.evaluate(S, dict.has_network() ? &record : nullptr);
    Matrix Psi0, Psi1;
    gather_pairs(Psi, first, second, Psi0, Psi1);

    const double loss_pre = epoch > 1 ? loss_from(Psi0, Psi1, K, config.lambda)
                                      : std::numeric_limits<double>::quiet_NaN();

    const Matrix G = gemm_abt(Psi0, Psi0) / static_cast<double>(n_pairs);
    const Matrix A = gemm_abt(Psi0, Psi1) / static_cast<double>(n_pairs);
    K = compute_K(G, A, lambda_eff, config.svd_cutoff);

    const double loss = loss_from(Psi0, Psi1, K, config.lambda);
    report.loss.push_back(loss);
    report.loss_pre_update.push_back(loss_pre);

    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "train: loss became non-finite at epoch " << epoch << "; recent trace:";
      const std::size_t from = report.loss.size() > 5 ? report.loss.size() - 5 : 0;
      for (std::size_t i = from; i < report.loss.size(); ++i) msg << " " << report.loss[i];
      throw NumericalError(msg.str());
    }

    if (loss < best_loss) {
      best_loss = loss;
      best_theta = theta;
      best_K = K;
      best_epoch = epoch;
    }

    if (log && (epoch % std::max<Index>(1, config.log_every) == 0 || epoch == 1))
      (*log) << "epoch " << epoch << "  J " << loss
             << (epoch > 1 ? "  J_pre " + std::to_string(loss_pre) : std::string()) << "\n";
    if (checkpoint && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0)
      checkpoint(epoch, dict, K);

    report.epochs = epoch;
    if (loss <= config.epsilon) {
      report.converged = true;
      best_loss = loss;
      best_theta = theta;
      best_K = K;
      best_epoch = epoch;
      break;
    }
    if (epoch == config.max_epochs) break;

    // Gradient phase: Adam step(s) on the dictionary parameters at fixed K.
    for (Index inner = 0; inner < config.inner_steps; ++inner) {
      if (inner > 0) {
        const Matrix Psi_inner = dict.evaluate(S, &record);
        gather_pairs(Psi_inner, first, second, Psi0, Psi1);
      }

      // R = Psi1 - K^T Psi0 columnwise; dJ/dPsi1 = 2R, dJ/dPsi0 = -2 K R.
      const Matrix R = Psi1 - gemm_cols(K.transpose(), Psi0);
      const Matrix KR = gemm_cols(K, R);

      std::vector<Index> batch;
      if (config.batch_size > 0 && config.batch_size < n_pairs) {
        batch.resize(static_cast<std::size_t>(n_pairs));
        std::iota(batch.begin(), batch.end(), Index{0});
        for (Index i = 0; i < config.batch_size; ++i) {
          const Index j =
              i + static_cast<Index>(shuffle_rng.next_u64() % static_cast<std::uint64_t>(
                                                                  n_pairs - i));
          std::swap(batch[static_cast<std::size_t>(i)], batch[static_cast<std::size_t>(j)]);
        }
        batch.resize(static_cast<std::size_t>(config.batch_size));
      } else {
        batch.resize(static_cast<std::size_t>(n_pairs));
        std::iota(batch.begin(), batch.end(), Index{0});
      }

      Matrix G_snap = Matrix::Zero(m, S.cols());
      for (const Index n : batch) {
        G_snap.col(second[static_cast<std::size_t>(n)]) += 2.0 * R.col(n);
        G_snap.col(first[static_cast<std::size_t>(n)]) -= 2.0 * KR.col(n);
      }

      const Vector grad =
          dict.network().backward(record, G_snap.bottomRows(m_train));
      adam_step(theta, grad, adam, adam_cfg);
      dict.network().set_parameters(theta);
    }
  }

  if (!report.converged) {
    dict.network().set_parameters(best_theta);
    theta = best_theta;
    K = best_K;
  }
  report.final_loss = best_loss;
  report.best_epoch = best_epoch;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();

  if (checkpoint) checkpoint(report.epochs, dict, K);

  auto shared_dict = std::make_shared<Dictionary>(dict);
  TrainOutput out{std::move(dict), decompose(K, shared_dict->observable_matrix(), shared_dict),
                  std::move(report)};
  return out;
}

}  // namespace koop
