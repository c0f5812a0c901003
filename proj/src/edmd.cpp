#include "koop/edmd.hpp"

#include <sstream>

#include "koop/parallel.hpp"

namespace koop {

Dictionary::Dictionary(Index state_dim, std::unique_ptr<DictionaryNetwork> network,
                       bool include_constant)
    : state_dim_(state_dim), include_constant_(include_constant), network_(std::move(network)) {
  if (state_dim_ < 1) throw InvalidInput("Dictionary: state dimension must be positive");
  if (network_ && network_->arch().input_dim != state_dim_)
    throw InvalidInput("Dictionary: network input dimension does not match the state dimension");
  if (!network_ && !include_constant_ && state_dim_ < 1)
    throw InvalidInput("Dictionary: empty dictionary");
}

Dictionary Dictionary::projections_only(Index state_dim, bool include_constant) {
  return Dictionary(state_dim, nullptr, include_constant);
}

Dictionary::Dictionary(const Dictionary& other)
    : state_dim_(other.state_dim_),
      include_constant_(other.include_constant_),
      network_(other.network_ ? other.network_->clone() : nullptr) {}

Dictionary& Dictionary::operator=(const Dictionary& other) {
  if (this != &other) {
    state_dim_ = other.state_dim_;
    include_constant_ = other.include_constant_;
    network_ = other.network_ ? other.network_->clone() : nullptr;
  }
  return *this;
}

Index Dictionary::size() const {
  return (include_constant_ ? 1 : 0) + state_dim_ +
         (network_ ? network_->arch().output_dim : 0);
}

DictionaryNetwork& Dictionary::network() {
  if (!network_) throw InvalidInput("Dictionary: no trainable network present");
  return *network_;
}

const DictionaryNetwork& Dictionary::network() const {
  if (!network_) throw InvalidInput("Dictionary: no trainable network present");
  return *network_;
}

Index Dictionary::trainable_offset() const { return (include_constant_ ? 1 : 0) + state_dim_; }

Matrix Dictionary::evaluate(const Matrix& X, ForwardRecord* record) const {
  if (X.rows() != state_dim_) throw InvalidInput("Dictionary::evaluate: wrong state dimension");

  Matrix Psi(size(), X.cols());
  Index row = 0;
  if (include_constant_) {
    Psi.row(0).setOnes();
    row = 1;
  }
  Psi.middleRows(row, state_dim_) = X;
  if (network_) Psi.bottomRows(network_->arch().output_dim) = network_->forward(X, record);
  return Psi;
}

Matrix Dictionary::observable_matrix() const {
  Matrix B = Matrix::Zero(size(), state_dim_);
  B.block(include_constant_ ? 1 : 0, 0, state_dim_, state_dim_) =
      Matrix::Identity(state_dim_, state_dim_);
  return B;
}

GramPair compute_gram(const Dictionary& dict, const TimeSeriesDataset& dataset,
                      ForwardRecord* record) {
  dataset.validate();
  if (dataset.state_dim != dict.state_dim())
    throw InvalidInput("compute_gram: dataset dimension does not match the dictionary");
  const Index n_pairs = dataset.pair_count();
  if (n_pairs < 1) throw InvalidInput("compute_gram: dataset has no transition pairs");

  const Matrix Psi = dict.evaluate(dataset.snapshots(), record);

  std::vector<Index> first, second;
  dataset.pair_indices(first, second);

  const Index m = dict.size();
  Matrix Psi0(m, n_pairs), Psi1(m, n_pairs);
  for (Index n = 0; n < n_pairs; ++n) {
    Psi0.col(n) = Psi.col(first[static_cast<std::size_t>(n)]);
    Psi1.col(n) = Psi.col(second[static_cast<std::size_t>(n)]);
  }

  GramPair out;
  out.G = gemm_abt(Psi0, Psi0) / static_cast<double>(n_pairs);
  out.A = gemm_abt(Psi0, Psi1) / static_cast<double>(n_pairs);
  return out;
}

Matrix compute_K(const Matrix& G, const Matrix& A, double lambda, double svd_cutoff) {
  if (G.rows() != G.cols() || A.rows() != A.cols() || G.rows() != A.rows())
    throw InvalidInput("compute_K: G and A must be square with matching size");
  if (lambda < 0.0) throw InvalidInput("compute_K: lambda must be non-negative");

  Matrix reg = G;
  reg.diagonal().array() += lambda;
  return pseudo_inverse(reg, svd_cutoff) * A;
}

KoopmanModel decompose(const Matrix& K, const Matrix& B,
                       std::shared_ptr<const Dictionary> dictionary) {
  if (K.rows() != K.cols()) throw InvalidInput("decompose: K must be square");
  if (B.rows() != K.rows()) throw InvalidInput("decompose: B must have M rows");

  const EigenDecomposition eig = eig_nonsymmetric(K);

  KoopmanModel model;
  model.K = K;
  model.B = B;
  model.eigenvalues = eig.eigenvalues;
  model.right = eig.right;
  model.left = eig.left;
  // m_k = (xi_k^* B)^T = B^T conj(xi_k)
  model.modes = B.transpose().cast<Complex>() * eig.left.conjugate();
  model.dictionary = std::move(dictionary);
  return model;
}

ComplexMatrix eigenfunctions_at(const KoopmanModel& model, const Matrix& X) {
  if (!model.dictionary) throw InvalidInput("eigenfunctions_at: model has no dictionary");
  const Matrix Psi = model.dictionary->evaluate(X);
  return model.right.transpose() * Psi.cast<Complex>();
}

namespace {

// Real part of a complex state batch, with a guard on the imaginary residue
// that conjugate-pair cancellation should have removed.
Matrix realize(const ComplexMatrix& Xc, Index step) {
  const double re_max = Xc.real().cwiseAbs().maxCoeff();
  const double im_max = Xc.imag().cwiseAbs().maxCoeff();
  if (im_max > 1e-6 * std::max(1.0, re_max)) {
    std::ostringstream msg;
    msg << "predict: imaginary residue " << im_max << " at step " << step
        << " exceeds the conjugate-cancellation tolerance";
    throw NumericalError(msg.str());
  }
  return Xc.real();
}

}  // namespace

Matrix predict(const KoopmanModel& model, const Vector& x0, Index n_steps) {
  if (!model.dictionary) throw InvalidInput("predict: model has no dictionary");
  if (n_steps < 0) throw InvalidInput("predict: negative step count");

  const ComplexMatrix coef0 = eigenfunctions_at(model, x0);  // M x 1
  ComplexVector coef = coef0.col(0);

  Matrix traj(model.B.cols(), n_steps + 1);
  for (Index n = 0; n <= n_steps; ++n) {
    traj.col(n) = realize(model.modes * coef, n);
    if (n < n_steps) coef.array() *= model.eigenvalues.array();
  }
  return traj;
}

Matrix predict_state_at(const KoopmanModel& model, const Matrix& X0, Index n_steps) {
  if (!model.dictionary) throw InvalidInput("predict: model has no dictionary");
  if (n_steps < 0) throw InvalidInput("predict: negative step count");

  ComplexMatrix coef = eigenfunctions_at(model, X0);  // M x N
  for (Index n = 0; n < n_steps; ++n)
    coef.array().colwise() *= model.eigenvalues.array();
  return realize(model.modes * coef, n_steps);
}

}  // namespace koop
