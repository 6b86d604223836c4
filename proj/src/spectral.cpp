#include "lunmix/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <limits>
#include <sstream>

namespace lunmix {

namespace {

Matrix pinv_from_svd(const Matrix& U, const Vector& sv, const Matrix& V,
                     double max_dim) {
  double cutoff = max_dim * std::numeric_limits<double>::epsilon() *
                  (sv.size() > 0 ? sv(0) : 0.0);
  Vector inv = Vector::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
  return V * inv.asDiagonal() * U.transpose();
}

}  // namespace

Matrix pseudoinverse(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return Matrix::Zero(m.cols(), m.rows());
  double max_dim = static_cast<double>(std::max(m.rows(), m.cols()));
  if (std::min(m.rows(), m.cols()) >= 64) {
    // divide-and-conquer SVD for the large stacked mixing systems
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return pinv_from_svd(svd.matrixU(), svd.singularValues(), svd.matrixV(), max_dim);
  }
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return pinv_from_svd(svd.matrixU(), svd.singularValues(), svd.matrixV(), max_dim);
}

RowspaceCheck in_rowspace(const Matrix& M, const Vector& v, double tol) {
  RowspaceCheck rc;
  if (v.size() != M.cols()) throw DimensionError("in_rowspace: length mismatch");
  Matrix Mt = M.transpose();
  Vector proj = Mt * (pseudoinverse(Mt) * v);
  double scale = v.norm();
  rc.residual = scale > 0 ? (v - proj).norm() / scale : 0.0;
  rc.in = rc.residual <= tol;
  return rc;
}

DecomposeResult decompose(const Matrix& X, const Matrix& Y, int k) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols())
    throw DimensionError("decompose: X and Y must have equal shape");
  if (k < 1 || k > std::min(X.rows(), X.cols()))
    throw DimensionError("decompose: k out of range");

  Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  double cutoff = std::max(X.rows(), X.cols()) *
                  std::numeric_limits<double>::epsilon() * sv(0);
  if (sv.size() < k || sv(k - 1) <= std::max(cutoff, 1e-10 * sv(0))) {
    std::ostringstream os;
    os << "decompose: rank of X below k=" << k << " (sigma_k="
       << (sv.size() >= k ? sv(k - 1) : 0.0) << ")";
    throw ConditioningError(os.str());
  }
  Matrix U1 = svd.matrixU().leftCols(k);  // range(X)
  Matrix U2 = svd.matrixV().leftCols(k);  // range(X^T)

  Matrix W_x = U1.transpose() * X * U2;
  Matrix W_y = U1.transpose() * Y * U2;
  DecomposeResult res;
  {
    Eigen::JacobiSVD<Matrix> wsvd(W_x);
    res.min_sv_whitened = wsvd.singularValues().minCoeff();
  }
  Matrix pencil = W_y * W_x.inverse();

  Eigen::EigenSolver<Matrix> eig(pencil);
  CVector evals = eig.eigenvalues();
  CMatrix V = eig.eigenvectors();

  double max_abs = 0.0;
  for (int i = 0; i < k; ++i) max_abs = std::max(max_abs, std::abs(evals(i)));
  double sep = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      sep = std::min(sep, std::abs(evals(i) - evals(j)));
  if (k > 1) {
    res.eigenvalue_separation = sep;
    if (sep < 1e-8 * std::max(max_abs, 1e-300)) {
      std::ostringstream os;
      os << "decompose: eigenvalue separation " << sep
         << " below 1e-8 * " << max_abs << "; D entries not distinct";
      throw ConditioningError(os.str());
    }
  } else {
    res.eigenvalue_separation = std::numeric_limits<double>::infinity();
  }
  {
    Eigen::JacobiSVD<CMatrix> vsvd(V);
    res.min_sv_eigenvectors = vsvd.singularValues().minCoeff();
  }

  CMatrix rec = pseudoinverse(U1.transpose()).cast<std::complex<double>>() * V;
  res.imaginary_residue = rec.imag().cwiseAbs().maxCoeff();
  res.M1 = rec.real();
  res.eigenvalues = evals;
  return res;
}

Matrix normalize_columns_to_stochastic(const Matrix& m) {
  Matrix out = m;
  for (int c = 0; c < out.cols(); ++c) {
    double s = out.col(c).sum();
    if (std::abs(s) < 1e-300)
      throw ConditioningError("normalize_columns_to_stochastic: zero column sum");
    out.col(c) /= s;
  }
  return out;
}

}  // namespace lunmix
