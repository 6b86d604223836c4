#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "lunmix/model.hpp"
#include "lunmix/observations.hpp"

namespace lunmix {

// --- Backbone terms (constituency / PCFG-IE) -------------------------------
//
// Symbolic tree terms naming compound parameters: nil, designated leaf O:•,
// projected leaf O:◦, chain T:<t>, fork (T:<t>,T:<t>). Terms are
// hash-consed, so equal structure means equal id.

using TermId = int;

struct TermNode {
  enum class Op { nil, emit_des, emit_proj, chain, fork };
  Op op = Op::nil;
  TermId a = -1, b = -1;
};

class TermPool {
 public:
  TermPool();
  TermId nil() const { return 0; }
  TermId emit_des() const { return 1; }
  TermId emit_proj() const { return 2; }
  TermId chain(TermId t);
  TermId fork(TermId left, TermId right);

  // The Combine rule: forks wrap both children in one chain link; a sole
  // non-nil child gets a chain link; nil folds away. A right child that is a
  // chain ending in the projected leaf is moved to the left slot, since its
  // contribution is a diagonal factor regardless of side.
  TermId combine(TermId t1, TermId t2);

  bool proj_chain(TermId t) const;
  const TermNode& node(TermId t) const { return nodes_[t]; }
  int root_chain_length(TermId t) const;
  std::string to_string(TermId t) const;
  std::string finalized_string(TermId t) const;  // fork printed with [n3=...]

 private:
  std::vector<TermNode> nodes_;
  std::map<std::tuple<int, int, int>, TermId> index_;
};

// H(0, L): distinct backbone terms with topology counts, split points
// iterated descending so the left-branching topology registers first.
// Counts sum to |Trees_L|. Supports first/pair/thin observation ids.
std::vector<std::pair<TermId, long>> backbone_dp(TermPool& pool, const ObsId& o,
                                                 int L);

// Compound parameter of a finalized term under PCFG-IE parameters: d x d for
// pair/thin terms, d x 1 for first-moment terms. Throws ConfigError when the
// term contains the projected leaf but eta is missing.
Matrix eval_compound(const TermPool& pool, TermId t, const ModelParams& params,
                     const Vector* eta);

// --- Mixing matrices --------------------------------------------------------

struct MixingMatrix {
  std::vector<std::pair<int, std::string>> row_labels;  // (L, observation id)
  std::vector<std::string> col_labels;                  // canonical term strings
  std::vector<long> row_denoms;                         // |Trees_L| per row
  std::vector<std::vector<std::pair<int, long>>> rows_exact;  // (col, count)
  Matrix M;  // float render of the exact rationals

  int rows() const { return static_cast<int>(row_labels.size()); }
  int cols() const { return static_cast<int>(col_labels.size()); }
};

// PCFG-IE mixing system over a length range, built by the backbone DP.
// Rows are (L, position pattern); columns are shared across lengths whenever
// canonical terms coincide. Rows are eta-independent; eta enters only when
// evaluating compound parameters.
class PcfgIeMixing {
 public:
  PcfgIeMixing(const ObservationSpec& spec, std::vector<int> lengths);

  const MixingMatrix& matrix() const { return m_; }
  const std::vector<int>& lengths() const { return lengths_; }
  const ObservationSpec& spec() const { return spec_; }
  const std::vector<TermId>& columns() const { return col_terms_; }
  const TermPool& pool() const { return pool_; }
  TermPool& pool() { return pool_; }

  int match_column(TermId term) const;  // -1 when absent
  Matrix eval_column(int col, const ModelParams& params, const Vector* eta) const;

  // The term of Psi_2 = A diag(pi) T^T diag(A^T eta) A^T from the three-
  // pattern L=3 system.
  TermId psi2_term() const { return psi2_term_; }

  // Canonicalization soundness probe: evaluates every column at `draws`
  // random parameter draws and checks distinct columns stay distinct.
  bool columns_numerically_distinct(int k, int d, uint64_t seed, int draws,
                                    double tol) const;

 private:
  ObservationSpec spec_;
  std::vector<int> lengths_;
  TermPool pool_;
  MixingMatrix m_;
  std::vector<TermId> col_terms_;
  std::map<TermId, int> col_of_;
  TermId psi2_term_ = -1;
};

// --- Dependency mixing (DEP-I / DEP-IE / DEP-IES) ---------------------------
//
// Built by direct topology enumeration (L <= 4). Conditional pair moments
// factor as P_i diag(P_r pi) P_j^T where each P is a product of directed
// argument matrices along the backbone paths; the term algebra stores the
// direction sequences and collapses them per family (DEP-IE: lengths only;
// DEP-IES: stationarity also removes the root chain).

struct DepTerm {
  bool pair = true;
  std::vector<int> down_i, root_path, down_j;  // 0 = left arc, 1 = right arc

  bool operator<(const DepTerm& o) const {
    return std::tie(pair, down_i, root_path, down_j) <
           std::tie(o.pair, o.down_i, o.root_path, o.down_j);
  }
  std::string to_string() const;
};

class DepMixing {
 public:
  DepMixing(const ModelFamily& family, const ObservationSpec& spec,
            std::vector<int> lengths);

  const MixingMatrix& matrix() const { return m_; }
  const std::vector<DepTerm>& columns() const { return cols_; }
  Matrix eval_column(int col, const ModelParams& params) const;

 private:
  ModelFamily fam_;
  std::vector<DepTerm> cols_;
  std::map<DepTerm, int> col_of_;
  MixingMatrix m_;
};

// Convenience entry point used by the CLI: either mixing flavor's matrix.
MixingMatrix mixing_matrix(const ModelFamily& family, const ObservationSpec& spec,
                           const std::vector<int>& lengths);

}  // namespace lunmix
