#pragma once

#include <string>
#include <vector>

#include "lunmix/model.hpp"
#include "lunmix/observations.hpp"

namespace lunmix {

// Directed acyclic hypergraph encoding the sum over sentences, topologies,
// and hidden states. Each hyperpath corresponds to one (x, z) pair with
// weight constant * theta[param] per edge. param == -1 marks structural
// edges with no parameter. Emitting edges carry the sentence position and
// word they fix; per-moment factors attach there.
struct Hyperedge {
  int32_t a = 0, b = 0, c = 0;  // source, targets; node 0 is END
  int32_t param = -1;           // raw parameter index
  double constant = 1.0;        // e.g. the 1/|Trees| mass on root edges
  int16_t pos = 0;              // 1-based emitting position, 0 otherwise
  int32_t word = -1;            // 0-based emitted word
};

struct Hypergraph {
  ModelFamily family;
  int L = 0;
  int num_nodes = 0;                    // 0 = END, num_nodes-1 = START
  std::vector<Hyperedge> edges;         // grouped by source node, ascending
  std::vector<int> edge_begin;          // size num_nodes+1
  std::vector<std::string> node_names;  // for the debug dump

  static constexpr int kEnd = 0;
  int start() const { return num_nodes - 1; }
  std::string dump() const;
};

// Guard: topology enumeration limits apply (constants use topology_count).
Hypergraph build_hypergraph(const ModelFamily& family, int L);

// Multiplicative per-edge factor f_j for one scalar moment coordinate.
struct CoordFactor {
  struct Constraint {
    int pos = 0;
    int word = -1;          // >= 0: indicator of this word
    const Vector* eta = nullptr;  // else: projection weight eta[word]
  };
  std::vector<Constraint> constraints;

  double operator()(int pos, int word) const {
    double f = 1.0;
    for (const auto& c : constraints)
      if (c.pos == pos) f *= c.eta ? (*c.eta)(word) : (word == c.word ? 1.0 : 0.0);
    return f;
  }
};

CoordFactor coord_factor(const ObsId& o, int flat_index, int d,
                         const std::vector<Eta>& etas);

struct InsideOutside {
  Vector alpha, beta;
  double value = 0.0;  // alpha at START = E[phi_j]
};

InsideOutside inside_outside(const Hypergraph& h, const Vector& raw,
                             const CoordFactor& f, bool with_outside);

double inside_value(const Hypergraph& h, const Vector& raw, const CoordFactor& f);

// One inside pass per scalar moment coordinate.
MomentSet exact_moments(const ModelParams& params, const ObservationSpec& spec,
                        int L);

MomentSet exact_moments_range(const ModelParams& params, const ObservationSpec& spec,
                              const std::vector<int>& lengths);

// d E[phi_j] / d theta_i in the free-coordinate parameterization, rows
// stacked over lengths then observations then coordinates. Requires strictly
// interior parameters (the DEP-IES stationarity term divides by column mass).
Matrix jacobian(const ModelParams& params, const ObservationSpec& spec,
                const std::vector<int>& lengths);

}  // namespace lunmix
