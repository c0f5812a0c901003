#pragma once

#include <memory>

#include "koop/dataset.hpp"
#include "koop/networks.hpp"
#include "koop/numerics.hpp"
#include "koop/types.hpp"

namespace koop {

// Observable dictionary Psi = [1, x_1 .. x_d, trainable network outputs].
// The constant and projection entries are fixed for the dictionary's
// lifetime; they guard against the trivial all-zero solution and let the
// identity observable be expressed exactly.  The constant or the network may
// be omitted (projections-only dictionaries reproduce classical DMD).
class Dictionary {
 public:
  Dictionary(Index state_dim, std::unique_ptr<DictionaryNetwork> network,
             bool include_constant = true);

  static Dictionary projections_only(Index state_dim, bool include_constant = false);

  Dictionary(const Dictionary& other);
  Dictionary& operator=(const Dictionary& other);
  Dictionary(Dictionary&&) = default;
  Dictionary& operator=(Dictionary&&) = default;

  Index state_dim() const { return state_dim_; }
  Index size() const;  // M = constant + d + trainable outputs
  bool include_constant() const { return include_constant_; }
  bool has_network() const { return network_ != nullptr; }
  DictionaryNetwork& network();
  const DictionaryNetwork& network() const;

  // Row index where the trainable entries start (= constant + d).
  Index trainable_offset() const;

  // Psi evaluated columnwise on the batch X (d x N) -> M x N.  `record` is
  // forwarded to the network for a later backward pass.
  Matrix evaluate(const Matrix& X, ForwardRecord* record = nullptr) const;

  // B for the identity observable g(x) = x: the projection rows carry the
  // d x d identity, all other rows are zero; x = B^T Psi(x)^T exactly.
  Matrix observable_matrix() const;

 private:
  Index state_dim_;
  bool include_constant_;
  std::unique_ptr<DictionaryNetwork> network_;
};

struct GramPair {
  Matrix G;  // (1/N) sum Psi(x_n)^T Psi(x_n), symmetric PSD
  Matrix A;  // (1/N) sum Psi(x_n)^T Psi(x_{n+1})
};

// Averaged Gram matrices over the dataset's transition pairs.  Each unique
// snapshot is pushed through the dictionary once; the pair view is gathered
// by index.  `record`, when given, captures the network forward pass over
// the snapshot batch (used by the trainer).
GramPair compute_gram(const Dictionary& dict, const TimeSeriesDataset& dataset,
                      ForwardRecord* record = nullptr);

// K = (G + lambda I)^+ A.  With lambda = 0 this is the plain least-squares
// Koopman matrix G^+ A.
Matrix compute_K(const Matrix& G, const Matrix& A, double lambda, double svd_cutoff = 1e-12);

// Finite-dimensional Koopman approximation: spectral data of K plus the
// observable matrix and modes.  Invariants: xi_j^* zeta_k = delta_jk and
// m_k = (xi_k^* B)^T by construction.
struct KoopmanModel {
  Matrix K;                   // M x M
  Matrix B;                   // M x d
  ComplexVector eigenvalues;  // mu_k, canonical order (see eig_nonsymmetric)
  ComplexMatrix right;        // columns zeta_k
  ComplexMatrix left;         // columns xi_k
  ComplexMatrix modes;        // d x M, column k = m_k
  std::shared_ptr<const Dictionary> dictionary;
};

KoopmanModel decompose(const Matrix& K, const Matrix& B,
                       std::shared_ptr<const Dictionary> dictionary = nullptr);

// phi_k(x) = Psi(x) zeta_k for each eigenpair, evaluated columnwise on the
// batch X (d x N) -> M x N.
ComplexMatrix eigenfunctions_at(const KoopmanModel& model, const Matrix& X);

// Spectral multi-step prediction x~_n = sum_k mu_k^n m_k phi_k(x0) for
// n = 0..n_steps; returns d x (n_steps + 1) with column 0 the time-zero
// reconstruction of x0.  The imaginary residue left by conjugate-pair
// cancellation is discarded after asserting it is below 1e-6 relative to the
// real part; a larger residue throws (broken conjugate pairing).
Matrix predict(const KoopmanModel& model, const Vector& x0, Index n_steps);

// Same recurrence for a batch of initial states, returning only step
// `n_steps` (d x N).  Bitwise-consistent with predict() at the same step.
Matrix predict_state_at(const KoopmanModel& model, const Matrix& X0, Index n_steps);

}  // namespace koop
