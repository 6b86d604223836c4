#pragma once

#include <map>
#include <string>
#include <vector>

#include "lunmix/model.hpp"
#include "lunmix/observations.hpp"

namespace lunmix {

struct BlockError {
  double max_abs = 0.0;
  double frobenius = 0.0;
};

struct MatchReport {
  std::vector<int> permutation;  // recovered state j corresponds to true state permutation[j]
  std::map<std::string, BlockError> blocks;
  double matched_error = 0.0;  // max over blocks of max-abs after matching
};

// Permutation-invariant comparison: exact k! search for k <= 6, greedy
// assignment on emission-column correlation beyond. Dependency families have
// no hidden states, so the identity permutation is forced.
MatchReport match_params(const ModelParams& estimate, const ModelParams& truth);

// Applies the hidden-state relabeling (Pi^-1 pi, Pi^-1 T Pi, O Pi, ...).
ModelParams relabel_states(const ModelParams& params, const std::vector<int>& perm);

// Independent oracle: full enumeration over sentences, topologies, and
// hidden states. Guarded to L <= 4 and k, d <= 3.
MomentSet brute_force_moments(const ModelParams& params, const ObservationSpec& spec,
                              int L);

}  // namespace lunmix
