#pragma once

#include "lunmix/common.hpp"

namespace lunmix {

// Moore-Penrose pseudoinverse via SVD with the usual max(m,n)*eps*sigma_max
// cutoff. Satisfies the four Penrose identities to ~1e-10 * |M| on
// exact-rank inputs.
Matrix pseudoinverse(const Matrix& m);

struct RowspaceCheck {
  bool in = false;
  double residual = 0.0;  // |v - M^T (M^T)^+ v| / |v|
};

// Is v in the row space of M?
RowspaceCheck in_rowspace(const Matrix& M, const Vector& v, double tol);

struct DecomposeResult {
  Matrix M1;            // recovered factor, up to column permutation/scaling
  CVector eigenvalues;  // D's entries, permuted
  double min_sv_whitened = 0.0;   // smallest singular value of U1^T X U2
  double min_sv_eigenvectors = 0.0;  // conditioning of V
  double eigenvalue_separation = 0.0;
  double imaginary_residue = 0.0;  // largest |Im| removed when realifying
};

// Lemma-style simultaneous decomposition: given X = M1 M2^T and
// Y = M1 D M2^T (M1, M2 full column rank k, D diagonal with distinct
// entries), recovers M1 up to column permutation and scaling via an
// eigendecomposition of (U1^T Y U2)(U1^T X U2)^{-1}.
// Throws ConditioningError when rank(X) < k or when the eigenvalue
// separation falls below 1e-8 relative.
DecomposeResult decompose(const Matrix& X, const Matrix& Y, int k);

// Divides each column by its sum; throws ConditioningError on a zero sum.
Matrix normalize_columns_to_stochastic(const Matrix& m);

}  // namespace lunmix
