#include "lunmix/identifiability.hpp"

#include <algorithm>
#include <limits>

namespace lunmix {

RankDecision numerical_rank(const Vector& singular_values, int m, int n) {
  RankDecision dec;
  int count = static_cast<int>(singular_values.size());
  double smax = count > 0 ? singular_values(0) : 0.0;
  dec.tolerance = std::max(m, n) * smax * 1e-10;
  int r = 0;
  while (r < count && singular_values(r) > dec.tolerance) ++r;
  dec.rank = r;
  if (r > 0 && r < count && singular_values(r) > 0.0) {
    dec.gap_ratio = singular_values(r - 1) / singular_values(r);
    dec.indeterminate = dec.gap_ratio < 1e3;
  } else {
    dec.gap_ratio = std::numeric_limits<double>::infinity();
  }
  return dec;
}

IdentifiabilityVerdict check_identifiability(const ModelFamily& family,
                                             const ObservationSpec& spec,
                                             const std::vector<int>& lengths,
                                             uint64_t seed, int draws) {
  family.validate();
  IdentifiabilityVerdict v;
  v.seed = seed;
  v.draws = draws;
  v.n = free_dim(family);

  v.m = 0;
  for (int L : lengths)
    for (const auto& o : enumerate_observations(spec, L))
      v.m += o.flat_size(family.d);
  if (v.m == 0) {
    v.answer = IdentifiabilityVerdict::Answer::no;
    v.rank = 0;
    v.note = "observation set empty at every requested length";
    v.per_draw_ranks.assign(draws, 0);
    return v;
  }

  int best_rank = -1;
  bool all_indeterminate = true;
  for (int i = 0; i < draws; ++i) {
    Rng rng(mix_seed(seed, i));
    ModelParams theta = random_params(family, rng);
    Matrix J = jacobian(theta, spec, lengths);
    Eigen::JacobiSVD<Matrix> svd(J);
    Vector sv = svd.singularValues();
    RankDecision dec = numerical_rank(sv, v.m, v.n);
    v.per_draw_ranks.push_back(dec.rank);
    if (dec.indeterminate) continue;
    all_indeterminate = false;
    if (dec.rank > best_rank) {
      best_rank = dec.rank;
      v.singular_values.assign(sv.data(), sv.data() + sv.size());
      v.gap_ratio = dec.gap_ratio;
    }
  }
  if (all_indeterminate) {
    v.answer = IdentifiabilityVerdict::Answer::indeterminate;
    v.rank = *std::max_element(v.per_draw_ranks.begin(), v.per_draw_ranks.end());
    v.note = "singular-value gap below resolution on every draw";
    return v;
  }
  v.rank = best_rank;
  v.answer = best_rank == v.n ? IdentifiabilityVerdict::Answer::yes
                              : IdentifiabilityVerdict::Answer::no;
  return v;
}

std::string answer_name(IdentifiabilityVerdict::Answer a) {
  switch (a) {
    case IdentifiabilityVerdict::Answer::yes: return "yes";
    case IdentifiabilityVerdict::Answer::no: return "no";
    case IdentifiabilityVerdict::Answer::indeterminate: return "indeterminate";
  }
  return "?";
}

}  // namespace lunmix
