#include "lunmix/evaluation.hpp"

#include <algorithm>
#include <numeric>

namespace lunmix {

namespace {

BlockError diff(const Matrix& a, const Matrix& b) {
  BlockError e;
  e.max_abs = (a - b).lpNorm<Eigen::Infinity>();
  e.frobenius = (a - b).norm();
  return e;
}

BlockError diff(const Vector& a, const Vector& b) {
  BlockError e;
  e.max_abs = (a - b).lpNorm<Eigen::Infinity>();
  e.frobenius = (a - b).norm();
  return e;
}

}  // namespace

ModelParams relabel_states(const ModelParams& params, const std::vector<int>& perm) {
  const ModelFamily& fam = params.family;
  if (fam.is_dependency()) return params;
  int k = fam.k;
  ModelParams out = params;
  for (int i = 0; i < k; ++i) out.pi(i) = params.pi(perm[i]);
  auto relabel_kk = [&](const Matrix& m) {
    Matrix r(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) r(i, j) = m(perm[i], perm[j]);
    return r;
  };
  auto relabel_cols = [&](const Matrix& m) {
    Matrix r(m.rows(), k);
    for (int j = 0; j < k; ++j) r.col(j) = m.col(perm[j]);
    return r;
  };
  switch (fam.kind) {
    case FamilyKind::pcfg: {
      Matrix b(k * k, k);
      for (int s2 = 0; s2 < k; ++s2)
        for (int s3 = 0; s3 < k; ++s3)
          for (int s1 = 0; s1 < k; ++s1)
            b(s2 * k + s3, s1) = params.B(perm[s2] * k + perm[s3], perm[s1]);
      out.B = b;
      out.O = relabel_cols(params.O);
      break;
    }
    case FamilyKind::pcfg_i:
      out.T1 = relabel_kk(params.T1);
      out.T2 = relabel_kk(params.T2);
      out.O = relabel_cols(params.O);
      break;
    case FamilyKind::pcfg_ie:
    case FamilyKind::hmm:
      out.T = relabel_kk(params.T);
      out.O = relabel_cols(params.O);
      break;
    case FamilyKind::lcm:
      out.O = relabel_cols(params.O);
      break;
    default:
      break;
  }
  return out;
}

namespace {

MatchReport compare_direct(const ModelParams& est, const ModelParams& truth) {
  MatchReport r;
  r.blocks["pi"] = diff(est.pi, truth.pi);
  for (const auto& b : param_blocks(est.family)) {
    if (b.name == "pi") continue;
    const Matrix* me = nullptr;
    const Matrix* mt = nullptr;
    if (b.name == "B") { me = &est.B; mt = &truth.B; }
    else if (b.name == "T") { me = &est.T; mt = &truth.T; }
    else if (b.name == "T1") { me = &est.T1; mt = &truth.T1; }
    else if (b.name == "T2") { me = &est.T2; mt = &truth.T2; }
    else if (b.name == "O") { me = &est.O; mt = &truth.O; }
    else if (b.name == "A") { me = &est.A; mt = &truth.A; }
    else if (b.name == "A_left") { me = &est.A_left; mt = &truth.A_left; }
    else if (b.name == "A_right") { me = &est.A_right; mt = &truth.A_right; }
    if (me) r.blocks[b.name] = diff(*me, *mt);
  }
  r.matched_error = 0.0;
  for (auto& [name, e] : r.blocks) r.matched_error = std::max(r.matched_error, e.max_abs);
  return r;
}

}  // namespace

MatchReport match_params(const ModelParams& estimate, const ModelParams& truth) {
  if (estimate.family.kind != truth.family.kind ||
      estimate.family.k != truth.family.k || estimate.family.d != truth.family.d)
    throw DimensionError("match_params: family/dimension mismatch");

  const ModelFamily& fam = truth.family;
  if (fam.is_dependency()) {
    MatchReport r = compare_direct(estimate, truth);
    r.permutation = {};
    return r;
  }

  int k = fam.k;
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);

  if (k <= 6) {
    MatchReport best;
    best.matched_error = std::numeric_limits<double>::infinity();
    std::vector<int> p = perm;
    do {
      MatchReport r = compare_direct(estimate, relabel_states(truth, p));
      if (r.matched_error < best.matched_error) {
        best = r;
        best.permutation = p;
      }
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
  }

  // Greedy assignment on emission-column agreement (approximate for k > 6).
  std::vector<bool> used(k, false);
  std::vector<int> p(k, 0);
  for (int j = 0; j < k; ++j) {
    int arg = -1;
    double bestd = std::numeric_limits<double>::infinity();
    for (int t = 0; t < k; ++t) {
      if (used[t]) continue;
      double dd = (estimate.O.col(j) - truth.O.col(t)).norm();
      if (dd < bestd) {
        bestd = dd;
        arg = t;
      }
    }
    used[arg] = true;
    p[j] = arg;
  }
  MatchReport r = compare_direct(estimate, relabel_states(truth, p));
  r.permutation = p;
  return r;
}

MomentSet brute_force_moments(const ModelParams& params, const ObservationSpec& spec,
                              int L) {
  const ModelFamily& fam = params.family;
  if (L > 4 || fam.d > 3 || (fam.has_hidden_states() && fam.k > 3))
    throw EnumerationError("brute_force_moments guarded to L <= 4, k,d <= 3");

  MomentSet ms;
  ms.spec = spec;
  ms.d = fam.d;
  ms.lengths = {L};
  auto obs = enumerate_observations(spec, L);
  std::vector<Vector> acc;
  for (const auto& o : obs) acc.push_back(Vector::Zero(o.flat_size(fam.d)));

  auto trees = enumerate_parse_trees(fam, L);
  for (const auto& x : all_sentences(fam.d, L)) {
    double px = 0.0;
    for (const auto& z : trees) px += joint_prob(params, x, z);
    if (px == 0.0) continue;
    for (size_t i = 0; i < obs.size(); ++i)
      acc[i] += px * eval_phi(obs[i], spec.etas, x, fam.d);
  }
  ms.ids[L] = std::move(obs);
  ms.values[L] = std::move(acc);
  return ms;
}

}  // namespace lunmix
