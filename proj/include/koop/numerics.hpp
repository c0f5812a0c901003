#pragma once

#include "koop/types.hpp"

namespace koop {

// Moore-Penrose pseudo-inverse via singular value decomposition.  Singular
// values sigma with sigma <= cutoff * sigma_max are treated as exactly zero.
// Works for any rectangular A; throws NumericalError if the SVD fails and
// InvalidInput for an empty matrix or a negative cutoff.
Matrix pseudo_inverse(const Matrix& A, double cutoff = 1e-12);

// Full spectral data of a real square matrix K, ordered canonically:
// descending |mu|, ties broken by descending real part, then descending
// imaginary part (which keeps conjugate pairs adjacent, + before -).
struct EigenDecomposition {
  ComplexVector eigenvalues;  // mu_k
  ComplexMatrix right;        // columns zeta_k, unit 2-norm
  ComplexMatrix left;         // columns xi_k, scaled so xi_k^* zeta_k = 1
};

// Eigendecomposition of a real, generally non-symmetric square matrix.
// Left eigenvectors come from the inverse of the right-eigenvector matrix,
// which enforces biorthogonality (xi_j^* zeta_k = delta_jk) by construction.
// A (numerically) defective matrix is reported as a NumericalError naming the
// offending eigenvalue: defectiveness shows up as xi_k^* zeta_k ~ 0 before
// rescaling, i.e. a reciprocal condition number below `defect_tol`.
// Conjugate eigenpairs are stored as exact conjugates of one another.
EigenDecomposition eig_nonsymmetric(const Matrix& K, double defect_tol = 1e-12);

}  // namespace koop
