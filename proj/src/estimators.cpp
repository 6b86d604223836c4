#include "lunmix/estimators.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <sstream>

namespace lunmix {

namespace {

// Genericity gate for the decompose-based estimators. Recovery accuracy
// degrades as 1/(sigma_min * separation); below this product the result
// carries no usable precision in double arithmetic, which is the numerical
// face of the full-rank / distinct-eigenvalue preconditions.
void require_generic_pencil(const DecomposeResult& dr, const Matrix& X) {
  double scale = X.norm();
  double max_eig = 0.0;
  for (int i = 0; i < dr.eigenvalues.size(); ++i)
    max_eig = std::max(max_eig, std::abs(dr.eigenvalues(i)));
  if (scale <= 0.0 || max_eig <= 0.0)
    throw ConditioningError("decompose inputs are numerically zero");
  double rel_sv = dr.min_sv_whitened / scale;
  double rel_sep = dr.eigenvalue_separation / max_eig;
  if (dr.eigenvalues.size() > 1 && rel_sv * rel_sep < 1e-10) {
    std::ostringstream os;
    os << "pencil too ill-conditioned for recovery (sigma_min/|X| = " << rel_sv
       << ", eigenvalue separation " << rel_sep << " relative)";
    throw ConditioningError(os.str());
  }
}

Matrix clip_to_stochastic(const Matrix& m) {
  Matrix out = m.cwiseMax(0.0);
  for (int c = 0; c < out.cols(); ++c) {
    double s = out.col(c).sum();
    if (s <= 0.0)
      throw ConditioningError("projection: a recovered column has no positive mass");
    out.col(c) /= s;
  }
  return out;
}

Vector clip_to_simplex(const Vector& v) {
  Vector out = v.cwiseMax(0.0);
  double s = out.sum();
  if (s <= 0.0)
    throw ConditioningError("projection: recovered distribution has no positive mass");
  return out / s;
}

}  // namespace

std::vector<Matrix> unmix(const MomentSet& mu, int eta_index,
                          const PcfgIeMixing& mix,
                          const std::vector<int>& wanted, double rowspace_tol) {
  const MixingMatrix& m = mix.matrix();
  const bool thin = mix.spec().family == ObsFamily::thin_triples ||
                    mix.spec().family == ObsFamily::all_thin_triples;
  int n_etas = thin ? static_cast<int>(mu.spec.etas.size()) : 1;
  if (thin && (eta_index < 0 || eta_index >= n_etas))
    throw ConfigError("unmix: eta index out of range");

  // collect the per-row observed matrices, aligned with the mixing rows
  std::vector<Matrix> rows;
  rows.reserve(m.rows());
  int cursor_L = -1;
  int pattern = 0;
  for (int r = 0; r < m.rows(); ++r) {
    int L = m.row_labels[r].first;
    if (L != cursor_L) {
      cursor_L = L;
      pattern = 0;
    }
    auto it = mu.values.find(L);
    if (it == mu.values.end())
      throw ConfigError("unmix: moments missing for length " + std::to_string(L));
    int index = thin ? pattern * n_etas + eta_index : pattern;
    if (index >= static_cast<int>(it->second.size()))
      throw ConfigError("unmix: moment set does not align with the mixing rows");
    rows.push_back(mu.as_matrix(L, index));
    ++pattern;
  }

  for (int p : wanted) {
    auto rc = in_rowspace(m.M, Vector::Unit(m.cols(), p), rowspace_tol);
    if (!rc.in) {
      std::ostringstream os;
      os << "unmix: e_p for column '" << m.col_labels.at(p)
         << "' is not in the row space of M (residual " << rc.residual << ")";
      throw ConditioningError(os.str());
    }
  }

  Matrix pinv = pseudoinverse(m.M);
  std::vector<Matrix> out;
  for (int p : wanted) {
    Matrix psi = Matrix::Zero(mu.d, mu.d);
    for (int r = 0; r < m.rows(); ++r) psi += pinv(p, r) * rows[r];
    out.push_back(std::move(psi));
  }
  return out;
}

void recover_pi_T_O_from_A(const Matrix& A_perm, const Matrix& psi21, Vector* pi,
                           Matrix* T, Matrix* O) {
  Matrix Adag = pseudoinverse(A_perm);
  Vector api = psi21 * Vector::Ones(psi21.cols());  // Psi_{2;1} 1 = A pi
  *pi = Adag * api;
  for (int i = 0; i < pi->size(); ++i)
    if ((*pi)(i) <= 0.0)
      throw ConditioningError("recover_pi_T_O_from_A: nonpositive entry in recovered pi");
  Matrix mid = Adag * psi21.transpose() * Adag.transpose();  // Pi^-1 T diag(pi) Pi
  *T = mid * pi->cwiseInverse().asDiagonal();
  Eigen::PartialPivLU<Matrix> lu(*T);
  double det = std::abs(lu.determinant());
  if (det < 1e-12)
    throw ConditioningError("recover_pi_T_O_from_A: recovered T is singular");
  *O = A_perm * lu.inverse();
}

RecoveredParams estimate_pcfg_ie(const MomentSet& mu, const PcfgIeMixing& mix,
                                 int k) {
  if (mu.spec.etas.size() < 2)
    throw ConfigError("estimate_pcfg_ie: needs moments at two projections");
  if (mu.spec.etas[0].tag != "ones")
    throw ConfigError("estimate_pcfg_ie: etas[0] must be the all-ones projection");

  int psi2_col = mix.match_column(mix.psi2_term());
  if (psi2_col < 0)
    throw ConfigError(
        "estimate_pcfg_ie: mixing system lacks the Psi_2 column; include L=3");

  RecoveredParams rec;
  auto rc = in_rowspace(mix.matrix().M, Vector::Unit(mix.matrix().cols(), psi2_col),
                        1e-8);
  rec.diagnostics.rowspace_residual = rc.residual;
  Matrix psi2_ones = unmix(mu, 0, mix, {psi2_col})[0];
  Matrix psi2_tau = unmix(mu, 1, mix, {psi2_col})[0];
  rec.diagnostics.eta_tag = mu.spec.etas[1].tag;

  DecomposeResult dr = decompose(psi2_ones.transpose(), psi2_tau.transpose(), k);
  require_generic_pencil(dr, psi2_ones.transpose());
  rec.diagnostics.decompose_min_sv = dr.min_sv_whitened;
  rec.diagnostics.eigenvalue_separation = dr.eigenvalue_separation;
  rec.diagnostics.imaginary_residue = dr.imaginary_residue;
  for (int i = 0; i < dr.eigenvalues.size(); ++i)
    rec.diagnostics.eigenvalues.push_back(dr.eigenvalues(i));

  Matrix A_perm = normalize_columns_to_stochastic(dr.M1);
  Vector pi;
  Matrix T, O;
  recover_pi_T_O_from_A(A_perm, psi2_ones, &pi, &T, &O);

  ModelFamily fam{FamilyKind::pcfg_ie, k, mu.d};
  rec.raw_params.family = fam;
  rec.raw_params.pi = pi;
  rec.raw_params.T = T;
  rec.raw_params.O = O;
  rec.params.family = fam;
  rec.params.pi = clip_to_simplex(pi);
  rec.params.T = clip_to_stochastic(T);
  rec.params.O = clip_to_stochastic(O);
  rec.permutation_ambiguity = true;
  return rec;
}

namespace {

// closed-form DEP-IES refit of the moments used by the estimator
double dep_ies_refit_residual(const Matrix& A, const Vector& pi, const Matrix& mu12,
                              const Matrix& mu13, const Matrix& mu12_tilde) {
  Matrix D = pi.asDiagonal();
  Matrix At = A.transpose();
  Matrix r12 =
      (D * At + D * At + D * At * At + A * D + A * D * At + A * D + D * At) / 7.0;
  Matrix r13 =
      (D * At + D * At * At + D * At + A * D * At + A * D + A * A * D + A * D) / 7.0;
  Matrix r12t = (D * At + A * D) / 2.0;
  double res = (r12 - mu12).lpNorm<Eigen::Infinity>();
  res = std::max(res, (r13 - mu13).lpNorm<Eigen::Infinity>());
  res = std::max(res, (r12t - mu12_tilde).lpNorm<Eigen::Infinity>());
  return res;
}

}  // namespace

RecoveredParams estimate_dep_ies(const Vector& mu1, const Matrix& mu12,
                                 const Matrix& mu13, const Matrix& mu12_tilde) {
  int d = static_cast<int>(mu1.size());
  for (int i = 0; i < d; ++i)
    if (mu1(i) <= 0.0)
      throw ConditioningError("estimate_dep_ies: mu1 must be entrywise positive");

  Matrix G = (7.0 * (mu13 - mu12) + 2.0 * mu12_tilde) * mu1.cwiseInverse().asDiagonal();
  // G estimates AA + A, whose column sums are exactly 2; the observed defect
  // measures the moment noise and scales the stochasticity validation below.
  double noise_scale =
      (G.colwise().sum().transpose() - Vector::Constant(d, 2.0))
          .lpNorm<Eigen::Infinity>();
  double col_tol = std::max(1e-6, 10.0 * noise_scale);
  Eigen::ComplexEigenSolver<Matrix> eig(G);
  if (eig.info() != Eigen::Success)
    throw ConditioningError("estimate_dep_ies: eigendecomposition of AA + A failed");
  CMatrix Q = eig.eigenvectors();
  CVector gamma = eig.eigenvalues();
  // Q must be invertible (A diagonalizable in generic position)
  {
    Eigen::JacobiSVD<CMatrix> svd(Q);
    double smin = svd.singularValues().minCoeff();
    double smax = svd.singularValues().maxCoeff();
    if (smin < 1e-10 * smax)
      throw ConditioningError("estimate_dep_ies: AA + A is not diagonalizable");
  }
  CMatrix Qinv = Q.inverse();

  auto assemble = [&](const std::vector<int>& branches, CVector* lambda_out) {
    CVector lambda(d);
    for (int i = 0; i < d; ++i) {
      std::complex<double> root = std::sqrt(std::complex<double>(1.0, 0.0) +
                                            4.0 * gamma(i));
      lambda(i) = branches[i] == 0 ? (-1.0 + root) / 2.0 : (-1.0 - root) / 2.0;
    }
    if (lambda_out) *lambda_out = lambda;
    CMatrix Ac = Q * lambda.asDiagonal() * Qinv;
    return Ac;
  };

  struct Candidate {
    std::vector<int> branches;
    Matrix A;
    double imag_residue;
    double col_sum_err;
    double refit;
    bool valid;
  };
  auto evaluate = [&](const std::vector<int>& branches) {
    Candidate cand;
    cand.branches = branches;
    CVector lambda;
    CMatrix Ac = assemble(branches, &lambda);
    cand.imag_residue = Ac.imag().cwiseAbs().maxCoeff();
    cand.A = Ac.real();
    cand.col_sum_err =
        (cand.A.colwise().sum().transpose() - Vector::Ones(d)).lpNorm<Eigen::Infinity>();
    cand.refit = dep_ies_refit_residual(cand.A, mu1, mu12, mu13, mu12_tilde);
    cand.valid = cand.imag_residue < 1e-8 && cand.col_sum_err < col_tol;
    return cand;
  };

  Candidate chosen = evaluate(std::vector<int>(d, 0));
  if (!chosen.valid || chosen.refit > 1e-8) {
    if (d > 8)
      throw ConditioningError(
          "estimate_dep_ies: principal-branch roots rejected and the 2^d "
          "assignment search is limited to d <= 8");
    std::vector<Candidate> valid;
    for (int mask = 0; mask < (1 << d); ++mask) {
      std::vector<int> branches(d);
      for (int i = 0; i < d; ++i) branches[i] = (mask >> i) & 1;
      Candidate c = evaluate(branches);
      if (c.valid) valid.push_back(std::move(c));
    }
    if (valid.empty())
      throw ConditioningError(
          "estimate_dep_ies: no root assignment yields a real near-stochastic A");
    std::sort(valid.begin(), valid.end(),
              [](const Candidate& a, const Candidate& b) { return a.refit < b.refit; });
    if (valid.size() > 1 && valid[1].refit < 10.0 * valid[0].refit &&
        valid[1].refit < 1e-6) {
      std::ostringstream os;
      os << "estimate_dep_ies: root selection ambiguous; candidates with refit "
         << valid[0].refit << " and " << valid[1].refit << ":\n"
         << valid[0].A << "\nvs\n"
         << valid[1].A;
      throw ConditioningError(os.str());
    }
    chosen = valid[0];
  }

  RecoveredParams rec;
  ModelFamily fam{FamilyKind::dep_ies, 0, d};
  rec.raw_params.family = fam;
  rec.raw_params.pi = mu1;
  rec.raw_params.A = chosen.A;
  rec.params.family = fam;
  rec.params.A = clip_to_stochastic(chosen.A);
  rec.params.pi = stationary_distribution(rec.params.A);
  rec.permutation_ambiguity = false;
  rec.diagnostics.imaginary_residue = chosen.imag_residue;
  rec.diagnostics.refit_residual = chosen.refit;
  rec.diagnostics.root_branches = chosen.branches;
  Eigen::ComplexEigenSolver<Matrix> ae(chosen.A);
  for (int i = 0; i < d; ++i) rec.diagnostics.eigenvalues.push_back(ae.eigenvalues()(i));
  return rec;
}

RecoveredParams estimate_hmm_allpairs(const Matrix& mu12, const Matrix& mu34,
                                      const Vector& mu1, int k) {
  int d = static_cast<int>(mu12.rows());
  DecomposeResult dr = decompose(mu12, mu34, k);
  require_generic_pencil(dr, mu12);

  RecoveredParams rec;
  rec.diagnostics.decompose_min_sv = dr.min_sv_whitened;
  rec.diagnostics.eigenvalue_separation = dr.eigenvalue_separation;
  rec.diagnostics.imaginary_residue = dr.imaginary_residue;
  for (int i = 0; i < dr.eigenvalues.size(); ++i)
    rec.diagnostics.eigenvalues.push_back(dr.eigenvalues(i));

  Matrix O_perm = normalize_columns_to_stochastic(dr.M1);
  Matrix Odag = pseudoinverse(O_perm);
  Vector pi = Odag * mu1;
  for (int i = 0; i < k; ++i)
    if (pi(i) <= 0.0)
      throw ConditioningError("estimate_hmm_allpairs: nonpositive entry in recovered pi");
  Matrix mid = Odag * mu12 * Odag.transpose();  // Pi^-1 diag(pi) T^T Pi
  Matrix T = (pi.cwiseInverse().asDiagonal() * mid).transpose();

  ModelFamily fam{FamilyKind::hmm, k, d};
  rec.raw_params.family = fam;
  rec.raw_params.pi = pi;
  rec.raw_params.T = T;
  rec.raw_params.O = O_perm;
  rec.params.family = fam;
  rec.params.pi = clip_to_simplex(pi);
  rec.params.T = clip_to_stochastic(T);
  rec.params.O = clip_to_stochastic(O_perm);
  rec.permutation_ambiguity = true;
  return rec;
}

}  // namespace lunmix
