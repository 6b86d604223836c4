#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lunmix/common.hpp"

namespace lunmix {

enum class FamilyKind { pcfg, pcfg_i, pcfg_ie, dep_i, dep_ie, dep_ies, hmm, lcm };

enum class TopologyKind { constituency, dependency, chain };

struct ModelFamily {
  FamilyKind kind;
  int k = 0;  // hidden states; unused for dependency families
  int d = 0;  // vocabulary size

  bool is_constituency() const {
    return kind == FamilyKind::pcfg || kind == FamilyKind::pcfg_i ||
           kind == FamilyKind::pcfg_ie;
  }
  bool is_dependency() const {
    return kind == FamilyKind::dep_i || kind == FamilyKind::dep_ie ||
           kind == FamilyKind::dep_ies;
  }
  bool is_chain() const { return kind == FamilyKind::hmm || kind == FamilyKind::lcm; }
  bool has_hidden_states() const { return !is_dependency(); }
  TopologyKind topology_kind() const {
    if (is_constituency()) return TopologyKind::constituency;
    if (is_dependency()) return TopologyKind::dependency;
    return TopologyKind::chain;
  }
  void validate() const;
};

std::string family_name(FamilyKind kind);
FamilyKind parse_family(const std::string& name);

// Column-wise tensor product: (A (x)col B)[(i1,i2), j] = A[i1,j] * B[i2,j],
// with the pair (i1,i2) encoded as i1*m + i2.
Matrix column_tensor(const Matrix& a, const Matrix& b);

struct ModelParams {
  ModelFamily family;
  Vector pi;             // k (constituency/chain) or d (dependency)
  Matrix B;              // k^2 x k, pcfg only
  Matrix T;              // k x k, pcfg_ie / hmm
  Matrix T1, T2;         // k x k, pcfg_i
  Matrix O;              // d x k
  Matrix A;              // d x d, dep_ie / dep_ies
  Matrix A_left, A_right;  // d x d, dep_i

  // Binary production matrix as used by the joint probability: B itself for
  // the PCFG, T1 (x)col T2 for PCFG-I, T (x)col T for PCFG-IE.
  Matrix production() const;
  const Matrix& left_arg() const;   // dependency: A or A_left
  const Matrix& right_arg() const;  // dependency: A or A_right

  void validate() const;  // throws DimensionError naming the failed invariant
};

ModelParams random_params(ModelFamily family, Rng& rng);

// A parse topology. Constituency trees store one (i, m, j) split per span of
// width > 1 over 0..L; dependency trees store (head, child) edges (1-based)
// plus the root position; chain models have a single fixed topology.
struct Topology {
  TopologyKind kind = TopologyKind::chain;
  int length = 0;
  std::vector<std::array<int, 3>> splits;      // (i, m, j), i < m < j
  std::vector<std::pair<int, int>> edges;      // (head, child)
  int root = 0;

  int split_for(int i, int j) const;  // constituency lookup
};

// Complete, duplicate-free list. Guards: L <= 12 constituency, L <= 8
// dependency (throws EnumerationError above that).
std::vector<Topology> enumerate_topologies(TopologyKind kind, int L);

// |Trees_L| for the family's topology kind (counting DP over spans; no
// closed form is assumed for dependency trees).
long topology_count(TopologyKind kind, int L);

bool is_projective(const std::vector<std::pair<int, int>>& edges, int root, int L);

struct Sentence {
  std::vector<int> words;  // 1-based word ids in [1, d]
  int length() const { return static_cast<int>(words.size()); }
};

// Topology plus hidden-state assignment. Constituency states align with
// constituency_nodes(); chain models use one state per position (a single
// state for the LCM); dependency trees carry no states.
struct ParseTree {
  Topology topo;
  std::vector<int> states;  // 0-based state ids
};

// All spans of the bracketing, width-1 leaves included, sorted by (i, j).
std::vector<std::pair<int, int>> constituency_nodes(const Topology& topo);

double joint_prob(const ModelParams& params, const Sentence& x, const ParseTree& z);

// Enumeration oracle: sums joint_prob over all trees and state assignments.
double marginal_prob(const ModelParams& params, const Sentence& x);

std::vector<ParseTree> enumerate_parse_trees(const ModelFamily& family, int L);
std::vector<Sentence> all_sentences(int d, int L);

Sentence sample_sentence(const ModelParams& params, int L, Rng& rng);

// pi with A pi = pi, pi >= 0, sum 1. Throws ConditioningError when the
// stationary distribution is not unique (reducible A).
Vector stationary_distribution(const Matrix& A);

// --- Parameter vectorization -----------------------------------------------
//
// Raw layout: all entries of every stochastic column, blocks in a fixed
// order (pi, productions, emissions), each block column-major. The free
// layout drops the last entry of every column; DEP-IES also drops the pi
// block entirely (pi is determined by stationarity).

struct ParamBlock {
  std::string name;  // "pi", "B", "T", "T1", "T2", "O", "A", "A_left", "A_right"
  int rows = 0;
  int cols = 0;
  bool free = true;  // participates in the free parameterization
  int raw_offset = 0;
};

std::vector<ParamBlock> param_blocks(const ModelFamily& family);
int raw_dim(const ModelFamily& family);
int free_dim(const ModelFamily& family);

Vector raw_vector(const ModelParams& params);
ModelParams params_from_raw(const ModelFamily& family, const Vector& raw);

Vector vectorize_params(const ModelParams& params);
// Throws DimensionError if any implied entry falls outside [0, 1].
ModelParams unvectorize_params(const ModelFamily& family, const Vector& theta);

}  // namespace lunmix
