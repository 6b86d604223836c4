#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lunmix/estimators.hpp"
#include "lunmix/evaluation.hpp"
#include "lunmix/identifiability.hpp"
#include "lunmix/mixing.hpp"
#include "lunmix/model.hpp"
#include "lunmix/observations.hpp"

namespace lunmix {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Parameter files: {"family": "...", "k": .., "d": .., "pi": [..],
// "T"/"B"/"T1"/"T2"/"O"/"A"/"A_left"/"A_right": [[row-major]]}.
nlohmann::ordered_json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

// Reports every violated invariant (empty result = valid).
std::vector<std::string> validate_params_report(const nlohmann::json& j);

nlohmann::ordered_json moments_to_json(const MomentSet& mu);

// Corpora: one sentence per line, space-separated 1-based word ids.
void save_corpus(const std::vector<Sentence>& corpus, const std::string& path);
std::vector<Sentence> load_corpus(const std::string& path);

// CSV with 12-significant-digit entries; rows labeled "L:obs".
void write_mixing_csv(const MixingMatrix& m, std::ostream& os);
nlohmann::ordered_json mixing_registry_json(const MixingMatrix& m);

nlohmann::ordered_json verdict_to_json(const IdentifiabilityVerdict& v);
nlohmann::ordered_json match_report_to_json(const MatchReport& r);
nlohmann::ordered_json recovered_to_json(const RecoveredParams& rec);

std::string format_sig(double v);  // 12 significant digits

}  // namespace lunmix
