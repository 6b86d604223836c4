#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "lunmix/common.hpp"
#include "lunmix/model.hpp"

namespace lunmix {

enum class ObsFamily {
  pairs,
  all_pairs,
  thin_triples,
  triples,
  all_thin_triples,
  all_triples,
  first_moment,
};

std::string obs_family_name(ObsFamily f);
ObsFamily parse_obs_family(const std::string& name);

// A projection vector with a stable tag ("ones", "e1", "tau").
struct Eta {
  std::string tag;
  Vector v;
};

Eta eta_ones(int d);
Eta eta_e1(int d);
Eta eta_tau(int d, uint64_t seed);  // uniform [0,1]^d, seeded

// One observation: positions are 1-based. Pairs/full triples use pos[0..1] /
// pos[0..2]; thin triples read x_i (x) x_j scaled by eta^T x_k with
// (i, j, k) = pos and i < j. eta indexes ObservationSpec::etas.
struct ObsId {
  enum class Kind { first, pair, thin_triple, triple } kind;
  std::array<int, 3> pos{0, 0, 0};
  int eta = -1;

  int arity() const;
  int flat_size(int d) const;  // d, d^2, or d^3 moment coordinates
  std::string name(const std::vector<Eta>& etas) const;
};

struct ObservationSpec {
  ObsFamily family = ObsFamily::pairs;
  std::vector<Eta> etas;  // required (nonempty) for thin families

  static ObservationSpec make(ObsFamily family, std::vector<Eta> etas = {});
};

// Deterministic, sorted id list; empty (not an error) when L is below the
// family's arity.
std::vector<ObsId> enumerate_observations(const ObservationSpec& spec, int L);

// phi_o(x) as a flat vector (row-major over positions' word indices).
Vector eval_phi(const ObsId& o, const std::vector<Eta>& etas, const Sentence& x,
                int d);

// Observed moments for one spec over a set of sentence lengths. Values are
// aligned with enumerate_observations(spec, L) per length.
struct MomentSet {
  ObservationSpec spec;
  int d = 0;
  std::vector<int> lengths;
  std::map<int, std::vector<ObsId>> ids;
  std::map<int, std::vector<Vector>> values;

  int rows() const;              // total scalar moment coordinates
  Vector stacked() const;        // all coordinates, lengths ascending
  Matrix as_matrix(int L, int obs_index) const;  // pair/thin reshape (d x d)
  const Vector& flat(int L, int obs_index) const;
};

// Plug-in estimator of E[phi]; samples grouped by their own length. Throws
// ConfigError naming any requested length with no samples.
MomentSet empirical_moments(const std::vector<Sentence>& samples,
                            const ObservationSpec& spec, int d,
                            const std::vector<int>& lengths);

}  // namespace lunmix
