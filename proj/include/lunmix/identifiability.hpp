#pragma once

#include <string>
#include <vector>

#include "lunmix/hypergraph.hpp"
#include "lunmix/model.hpp"
#include "lunmix/observations.hpp"

namespace lunmix {

struct RankDecision {
  int rank = 0;
  double tolerance = 0.0;
  double gap_ratio = 0.0;    // sigma_rank / sigma_rank+1 (inf when nothing dropped)
  bool indeterminate = false;
};

// Count of singular values above max(m, n) * sigma_max * 1e-10; flags the
// decision indeterminate when the kept/dropped gap ratio falls below 1e3.
RankDecision numerical_rank(const Vector& singular_values, int m, int n);

struct IdentifiabilityVerdict {
  enum class Answer { yes, no, indeterminate };
  Answer answer = Answer::indeterminate;
  int rank = 0;  // generic rank: max over draws
  int n = 0;     // free parameter count
  int m = 0;     // moment coordinate count
  std::vector<double> singular_values;  // from the max-rank draw
  int draws = 0;
  std::vector<int> per_draw_ranks;
  double gap_ratio = 0.0;
  uint64_t seed = 0;
  std::string note;  // e.g. "observation set empty at every length"

  bool yes() const { return answer == Answer::yes; }
};

// CheckIdentifiability: draw interior parameters, stack the Jacobian over
// the given lengths, and decide by numerical rank. The verdict uses the
// maximal rank over draws (the generic rank is attained almost surely).
IdentifiabilityVerdict check_identifiability(const ModelFamily& family,
                                             const ObservationSpec& spec,
                                             const std::vector<int>& lengths,
                                             uint64_t seed, int draws = 3);

std::string answer_name(IdentifiabilityVerdict::Answer a);

}  // namespace lunmix
