#include "koop/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <numeric>
#include <sstream>
#include <vector>

namespace koop {

Matrix pseudo_inverse(const Matrix& A, double cutoff) {
  if (A.size() == 0) throw InvalidInput("pseudo_inverse: empty matrix");
  if (cutoff < 0.0) throw InvalidInput("pseudo_inverse: cutoff must be non-negative");
  if (!A.allFinite()) throw NumericalError("pseudo_inverse: input contains non-finite entries");

  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "pseudo_inverse: SVD failed to converge (solver status "
        << static_cast<int>(svd.info()) << ") for a " << A.rows() << "x" << A.cols()
        << " matrix";
    throw NumericalError(msg.str());
  }

  const Vector& sigma = svd.singularValues();
  const double threshold = sigma.size() > 0 ? cutoff * sigma(0) : 0.0;

  Vector inv_sigma(sigma.size());
  for (Index i = 0; i < sigma.size(); ++i)
    inv_sigma(i) = sigma(i) > threshold ? 1.0 / sigma(i) : 0.0;

  return svd.matrixV() * inv_sigma.asDiagonal() * svd.matrixU().transpose();
}

namespace {

// Canonical ordering: |mu| desc, then Re desc, then Im desc.
bool eig_order(const Complex& a, const Complex& b) {
  const double na = std::abs(a), nb = std::abs(b);
  if (na != nb) return na > nb;
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

}  // namespace

EigenDecomposition eig_nonsymmetric(const Matrix& K, double defect_tol) {
  if (K.rows() != K.cols() || K.size() == 0)
    throw InvalidInput("eig_nonsymmetric: matrix must be square and non-empty");
  if (!K.allFinite())
    throw NumericalError("eig_nonsymmetric: input contains non-finite entries");

  const Index m = K.rows();

  Eigen::EigenSolver<Matrix> solver(K, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eig_nonsymmetric: Schur iteration did not converge");

  ComplexVector mu = solver.eigenvalues();
  ComplexMatrix V = solver.eigenvectors();  // unit-norm columns

  // Left eigenvectors of K are the conjugated rows of V^{-1}:
  // V^{-1} K V = diag(mu)  =>  (row_k V^{-1}) K = mu_k (row_k V^{-1}).
  Eigen::PartialPivLU<ComplexMatrix> lu(V);
  ComplexMatrix W = lu.solve(ComplexMatrix::Identity(m, m));
  if (!W.allFinite())
    throw NumericalError(
        "eig_nonsymmetric: eigenvector matrix is numerically singular (defective input?)");

  // With xi_k = conj(row_k W), biorthogonality xi_j^* zeta_k = delta_jk holds by
  // construction.  Defectiveness is detected through the reciprocal eigenvalue
  // condition number s_k = |xi_k^* zeta_k| / (|xi_k| |zeta_k|), which collapses
  // toward zero when independent eigenvectors do not exist.
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return eig_order(mu(a), mu(b)); });

  EigenDecomposition out;
  out.eigenvalues.resize(m);
  out.right.resize(m, m);
  out.left.resize(m, m);

  for (Index k = 0; k < m; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    ComplexVector zeta = V.col(src);
    ComplexVector xi = W.row(src).conjugate().transpose();

    const double rcond = 1.0 / (zeta.norm() * xi.norm());
    if (!(rcond >= defect_tol)) {
      std::ostringstream msg;
      msg << "eig_nonsymmetric: eigenvalue " << k << " (mu = " << mu(src).real();
      if (mu(src).imag() != 0.0) msg << (mu(src).imag() > 0 ? "+" : "") << mu(src).imag() << "i";
      msg << ") is defective or near-defective (reciprocal condition " << rcond << ")";
      throw NumericalError(msg.str());
    }

    // Normalize the right vector; counter-scale the left one to keep
    // xi^* zeta = 1 exact up to roundoff.
    const double zn = zeta.norm();
    zeta /= zn;
    xi *= zn;
    const Complex p = xi.dot(zeta);  // conjugate-linear in xi
    xi /= std::conj(p);

    out.eigenvalues(k) = mu(src);
    out.right.col(k) = zeta;
    out.left.col(k) = xi;
  }

  // Snap adjacent conjugate pairs to exact conjugates so that downstream
  // sums over the spectrum cancel imaginary parts exactly.
  for (Index k = 0; k + 1 < m; ++k) {
    const Complex a = out.eigenvalues(k), b = out.eigenvalues(k + 1);
    if (a.imag() > 0.0 && b.real() == a.real() && b.imag() == -a.imag()) {
      out.right.col(k + 1) = out.right.col(k).conjugate();
      out.left.col(k + 1) = out.left.col(k).conjugate();
      ++k;
    }
  }

  return out;
}

}  // namespace koop
