#pragma once

#include <complex>
#include <string>
#include <vector>

#include "lunmix/mixing.hpp"
#include "lunmix/model.hpp"
#include "lunmix/observations.hpp"
#include "lunmix/spectral.hpp"

namespace lunmix {

// Retrieve compound parameters (M^+ mu)_p for the wanted columns of a
// PCFG-IE mixing system. For thin systems eta_index selects which
// projection's moment stack to unmix (the mixing matrix itself is
// eta-independent). Each wanted column must pass the row-space test; the
// error names the missing column.
std::vector<Matrix> unmix(const MomentSet& mu, int eta_index,
                          const PcfgIeMixing& mix,
                          const std::vector<int>& wanted,
                          double rowspace_tol = 1e-8);

struct EstimatorDiagnostics {
  double rowspace_residual = 0.0;
  double decompose_min_sv = 0.0;
  double eigenvalue_separation = 0.0;
  double imaginary_residue = 0.0;
  std::vector<std::complex<double>> eigenvalues;
  std::vector<int> root_branches;  // DEP-IES: 0 = principal, 1 = flipped
  double refit_residual = -1.0;
  std::string eta_tag;  // the random projection used, for reproducibility
};

struct RecoveredParams {
  ModelParams params;      // projected: negatives clipped, columns renormalized
  ModelParams raw_params;  // as recovered, before projection
  bool permutation_ambiguity = false;  // hidden-state families only
  EstimatorDiagnostics diagnostics;
};

// Pi^-1 pi, Pi^-1 T Pi, O Pi from A Pi and Psi_{2;1}; algebraically exact on
// exact inputs. Throws ConditioningError on a nonpositive recovered pi entry
// or a singular recovered T.
void recover_pi_T_O_from_A(const Matrix& A_perm, const Matrix& psi21, Vector* pi,
                           Matrix* T, Matrix* O);

// Spectral estimator for PCFG-IE from thin-triple moments observed
// at eta = ones and one more projection. mu must cover the mixing system's
// lengths; mu.spec.etas[0] must be the all-ones projection.
RecoveredParams estimate_pcfg_ie(const MomentSet& mu, const PcfgIeMixing& mix, int k);

// DEP-IES closed-form estimator from mu1, mu12, mu13 (length 3) and the
// length-2 pair moment. Root selection: principal branch per eigenvalue
// first, validated by realness / column sums / moment refit; on failure the
// 2^d assignments are searched and ambiguity is reported as an error.
RecoveredParams estimate_dep_ies(const Vector& mu1, const Matrix& mu12,
                                 const Matrix& mu13, const Matrix& mu12_tilde);

// HMM from AllPairs moments at L >= 4 (mu12, mu34) plus the first-word
// marginal. T = I style inputs surface as decompose conditioning errors.
RecoveredParams estimate_hmm_allpairs(const Matrix& mu12, const Matrix& mu34,
                                      const Vector& mu1, int k);

}  // namespace lunmix
