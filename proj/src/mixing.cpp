#include "lunmix/mixing.hpp"

#include <algorithm>
#include <sstream>

namespace lunmix {

TermPool::TermPool() {
  nodes_.push_back({TermNode::Op::nil});
  nodes_.push_back({TermNode::Op::emit_des});
  nodes_.push_back({TermNode::Op::emit_proj});
}

TermId TermPool::chain(TermId t) {
  auto key = std::make_tuple(static_cast<int>(TermNode::Op::chain), t, -1);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  TermId id = static_cast<TermId>(nodes_.size());
  nodes_.push_back({TermNode::Op::chain, t, -1});
  index_[key] = id;
  return id;
}

TermId TermPool::fork(TermId left, TermId right) {
  auto key = std::make_tuple(static_cast<int>(TermNode::Op::fork), left, right);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  TermId id = static_cast<TermId>(nodes_.size());
  nodes_.push_back({TermNode::Op::fork, left, right});
  index_[key] = id;
  return id;
}

TermId TermPool::combine(TermId t1, TermId t2) {
  if (t1 != nil() && t2 != nil()) {
    if (proj_chain(t2)) return fork(chain(t2), chain(t1));
    return fork(chain(t1), chain(t2));
  }
  if (t1 != nil()) return chain(t1);
  if (t2 != nil()) return chain(t2);
  return nil();
}

bool TermPool::proj_chain(TermId t) const {
  while (nodes_[t].op == TermNode::Op::chain) t = nodes_[t].a;
  return nodes_[t].op == TermNode::Op::emit_proj;
}

int TermPool::root_chain_length(TermId t) const {
  int n = 0;
  while (nodes_[t].op == TermNode::Op::chain) {
    t = nodes_[t].a;
    ++n;
  }
  return n;
}

std::string TermPool::to_string(TermId t) const {
  const TermNode& n = nodes_[t];
  switch (n.op) {
    case TermNode::Op::nil: return "nil";
    case TermNode::Op::emit_des: return "O:\u2022";
    case TermNode::Op::emit_proj: return "O:\u25e6";
    case TermNode::Op::chain: return "T:" + to_string(n.a);
    case TermNode::Op::fork: return "(" + to_string(n.a) + "," + to_string(n.b) + ")";
  }
  return "?";
}

std::string TermPool::finalized_string(TermId t) const {
  int n3 = root_chain_length(t);
  TermId inner = t;
  for (int i = 0; i < n3; ++i) inner = nodes_[inner].a;
  if (nodes_[inner].op == TermNode::Op::fork)
    return to_string(inner) + " [n3=" + std::to_string(n3) + "]";
  return to_string(t);
}

std::vector<std::pair<TermId, long>> backbone_dp(TermPool& pool, const ObsId& o,
                                                 int L) {
  if (o.kind == ObsId::Kind::triple)
    throw UnsupportedError("backbone_dp covers first/pair/thin observations only");
  for (int i = 0; i < o.arity(); ++i)
    if (o.pos[i] < 1 || o.pos[i] > L)
      throw DimensionError("observation positions must lie within [1, L]");

  using Cell = std::vector<std::pair<TermId, long>>;
  auto add = [](Cell& cell, TermId t, long count) {
    for (auto& [term, c] : cell)
      if (term == t) {
        c += count;
        return;
      }
    cell.push_back({t, count});
  };

  int designated = o.kind == ObsId::Kind::first ? 1 : 2;
  // chart indexed by (i, j), 0 <= i < j <= L
  std::vector<std::vector<Cell>> H(L + 1, std::vector<Cell>(L + 1));
  for (int i = 1; i <= L; ++i) {
    TermId leaf = pool.nil();
    for (int s = 0; s < designated; ++s)
      if (o.pos[s] == i) leaf = pool.emit_des();
    if (o.kind == ObsId::Kind::thin_triple && o.pos[2] == i) leaf = pool.emit_proj();
    H[i - 1][i].push_back({leaf, 1});
  }
  for (int w = 2; w <= L; ++w)
    for (int i = 0; i + w <= L; ++i) {
      int j = i + w;
      Cell& cell = H[i][j];
      for (int m = j - 1; m > i; --m)  // left-branching topologies first
        for (const auto& [t1, n1] : H[i][m])
          for (const auto& [t2, n2] : H[m][j]) add(cell, pool.combine(t1, t2), n1 * n2);
    }
  return H[0][L];
}

namespace {

// Branch values per entry state: a row of eta-projected mass, a d x k matrix
// of designated-word distributions, or k slices of d x d conditional moments.
struct BranchValue {
  enum class Kind { scalar, vector, slices } kind;
  Eigen::RowVectorXd w;
  Matrix V;
  std::vector<Matrix> S;
};

BranchValue eval_term(const TermPool& pool, TermId t, const ModelParams& p,
                      const Vector* eta) {
  const TermNode& n = pool.node(t);
  int k = p.family.k;
  switch (n.op) {
    case TermNode::Op::nil:
      throw UnsupportedError("eval_compound: nil inside a finalized term");
    case TermNode::Op::emit_des: {
      BranchValue v{BranchValue::Kind::vector};
      v.V = p.O;
      return v;
    }
    case TermNode::Op::emit_proj: {
      if (eta == nullptr)
        throw ConfigError("eval_compound: projected leaf present but eta missing");
      BranchValue v{BranchValue::Kind::scalar};
      v.w = eta->transpose() * p.O;
      return v;
    }
    case TermNode::Op::chain: {
      BranchValue v = eval_term(pool, n.a, p, eta);
      switch (v.kind) {
        case BranchValue::Kind::scalar: v.w = v.w * p.T; break;
        case BranchValue::Kind::vector: v.V = v.V * p.T; break;
        case BranchValue::Kind::slices: {
          std::vector<Matrix> out(k);
          for (int u = 0; u < k; ++u) {
            out[u] = Matrix::Zero(v.S[0].rows(), v.S[0].cols());
            for (int w2 = 0; w2 < k; ++w2) out[u] += p.T(w2, u) * v.S[w2];
          }
          v.S = std::move(out);
          break;
        }
      }
      return v;
    }
    case TermNode::Op::fork: {
      BranchValue l = eval_term(pool, n.a, p, eta);
      BranchValue r = eval_term(pool, n.b, p, eta);
      if (l.kind == BranchValue::Kind::scalar || r.kind == BranchValue::Kind::scalar) {
        const BranchValue& s = l.kind == BranchValue::Kind::scalar ? l : r;
        BranchValue other = l.kind == BranchValue::Kind::scalar ? r : l;
        switch (other.kind) {
          case BranchValue::Kind::scalar:
            other.w = other.w.cwiseProduct(s.w);
            return other;
          case BranchValue::Kind::vector:
            other.V = other.V * s.w.asDiagonal();
            return other;
          case BranchValue::Kind::slices:
            for (int u = 0; u < k; ++u) other.S[u] *= s.w(u);
            return other;
        }
      }
      if (l.kind == BranchValue::Kind::vector && r.kind == BranchValue::Kind::vector) {
        BranchValue v{BranchValue::Kind::slices};
        v.S.resize(k);
        for (int u = 0; u < k; ++u) v.S[u] = l.V.col(u) * r.V.col(u).transpose();
        return v;
      }
      throw UnsupportedError("eval_compound: fork joins more designated leaves than supported");
    }
  }
  throw UnsupportedError("eval_compound: bad term");
}

}  // namespace

Matrix eval_compound(const TermPool& pool, TermId t, const ModelParams& params,
                     const Vector* eta) {
  if (params.family.kind != FamilyKind::pcfg_ie)
    throw UnsupportedError("eval_compound takes PCFG-IE parameters");
  BranchValue v = eval_term(pool, t, params, eta);
  int k = params.family.k;
  switch (v.kind) {
    case BranchValue::Kind::slices: {
      Matrix out = Matrix::Zero(v.S[0].rows(), v.S[0].cols());
      for (int u = 0; u < k; ++u) out += params.pi(u) * v.S[u];
      return out;
    }
    case BranchValue::Kind::vector:
      return v.V * params.pi;  // first-moment term
    case BranchValue::Kind::scalar:
      throw UnsupportedError("eval_compound: term has no designated leaf");
  }
  throw UnsupportedError("eval_compound: bad value");
}

namespace {

std::string pattern_label(const ObsId& o) {
  std::ostringstream os;
  int n = o.arity();
  bool wide = false;
  for (int i = 0; i < n; ++i) wide = wide || o.pos[i] > 9;
  for (int i = 0; i < n; ++i) {
    if (i > 0 && wide) os << '.';
    os << o.pos[i];
  }
  if (o.kind == ObsId::Kind::thin_triple) os << "eta";
  return os.str();
}

// patterns only: thin ids collapse over etas
std::vector<ObsId> row_patterns(const ObservationSpec& spec, int L) {
  std::vector<ObsId> out;
  for (const auto& o : enumerate_observations(spec, L)) {
    if (o.kind == ObsId::Kind::thin_triple && o.eta != 0) continue;
    out.push_back(o);
  }
  return out;
}

}  // namespace

PcfgIeMixing::PcfgIeMixing(const ObservationSpec& spec, std::vector<int> lengths)
    : spec_(spec), lengths_(std::move(lengths)) {
  std::sort(lengths_.begin(), lengths_.end());
  if (spec_.family == ObsFamily::triples || spec_.family == ObsFamily::all_triples)
    throw UnsupportedError("PCFG-IE mixing covers pair and thin-triple observations");
  std::vector<std::vector<std::pair<int, long>>> rows;
  for (int L : lengths_) {
    long denom = topology_count(TopologyKind::constituency, L);
    for (const auto& o : row_patterns(spec_, L)) {
      auto terms = backbone_dp(pool_, o, L);
      std::vector<std::pair<int, long>> row;
      for (const auto& [term, count] : terms) {
        auto it = col_of_.find(term);
        int col;
        if (it == col_of_.end()) {
          col = static_cast<int>(col_terms_.size());
          col_of_[term] = col;
          col_terms_.push_back(term);
        } else {
          col = it->second;
        }
        row.push_back({col, count});
      }
      rows.push_back(std::move(row));
      m_.row_labels.push_back({L, pattern_label(o)});
      m_.row_denoms.push_back(denom);
    }
  }
  m_.rows_exact = std::move(rows);
  for (const auto& t : col_terms_) m_.col_labels.push_back(pool_.finalized_string(t));
  m_.M = Matrix::Zero(m_.rows(), m_.cols());
  for (int r = 0; r < m_.rows(); ++r)
    for (const auto& [c, count] : m_.rows_exact[r])
      m_.M(r, c) = static_cast<double>(count) / static_cast<double>(m_.row_denoms[r]);

  TermId des = pool_.emit_des();
  TermId inner = pool_.fork(pool_.chain(pool_.emit_proj()), pool_.chain(des));
  psi2_term_ = pool_.fork(pool_.chain(des), pool_.chain(inner));
}

int PcfgIeMixing::match_column(TermId term) const {
  auto it = col_of_.find(term);
  return it == col_of_.end() ? -1 : it->second;
}

Matrix PcfgIeMixing::eval_column(int col, const ModelParams& params,
                                 const Vector* eta) const {
  return eval_compound(pool_, col_terms_.at(col), params, eta);
}

bool PcfgIeMixing::columns_numerically_distinct(int k, int d, uint64_t seed,
                                                int draws, double tol) const {
  int C = static_cast<int>(col_terms_.size());
  if (C < 2) return true;
  std::vector<Vector> prints(C);
  for (int c = 0; c < C; ++c) prints[c] = Vector();
  for (int t = 0; t < draws; ++t) {
    Rng rng(mix_seed(seed, t));
    ModelParams p = random_params(ModelFamily{FamilyKind::pcfg_ie, k, d}, rng);
    Vector eta = uniform_vector(d, rng);
    for (int c = 0; c < C; ++c) {
      Matrix m = eval_column(c, p, &eta);
      Vector flat = Eigen::Map<Vector>(m.data(), m.size());
      Vector merged(prints[c].size() + flat.size() + 1);
      merged << prints[c], static_cast<double>(m.size()), flat;
      prints[c] = merged;
    }
  }
  std::vector<int> order(C);
  for (int i = 0; i < C; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Vector&va = prints[a];
    const Vector&vb = prints[b];
    if (va.size() != vb.size()) return va.size() < vb.size();
    for (int i = 0; i < va.size(); ++i)
      if (va(i) != vb(i)) return va(i) < vb(i);
    return false;
  });
  for (int i = 0; i + 1 < C; ++i) {
    const Vector& a = prints[order[i]];
    const Vector& b = prints[order[i + 1]];
    if (a.size() == b.size() && (a - b).lpNorm<Eigen::Infinity>() <= tol) return false;
  }
  return true;
}

std::string DepTerm::to_string() const {
  auto seq = [](const std::vector<int>& s) {
    if (s.empty()) return std::string("-");
    std::string out;
    for (int d : s) out += d == 0 ? 'L' : 'R';
    return out;
  };
  std::ostringstream os;
  if (pair)
    os << "A[" << seq(down_i) << "] D[" << seq(root_path) << "] A^T[" << seq(down_j)
       << "]";
  else
    os << "A[" << seq(down_i) << "] pi";
  return os.str();
}

namespace {

std::vector<int> path_from_root(const Topology& t, int v) {
  std::vector<int> parent(t.length + 1, 0);
  for (auto& [h, c] : t.edges) parent[c] = h;
  std::vector<int> path;  // nodes root .. v
  int cur = v;
  while (cur != 0) {
    path.push_back(cur);
    if (cur == t.root) break;
    cur = parent[cur];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<int> dirs_of(const std::vector<int>& nodes, size_t from) {
  std::vector<int> dirs;
  for (size_t i = from; i + 1 < nodes.size(); ++i)
    dirs.push_back(nodes[i + 1] < nodes[i] ? 0 : 1);
  return dirs;
}

DepTerm dep_term_for(const ModelFamily& fam, const Topology& t, const ObsId& o) {
  DepTerm term;
  if (o.kind == ObsId::Kind::first) {
    term.pair = false;
    auto path = path_from_root(t, o.pos[0]);
    term.down_i = dirs_of(path, 0);
  } else {
    term.pair = true;
    auto pi_ = path_from_root(t, o.pos[0]);
    auto pj_ = path_from_root(t, o.pos[1]);
    size_t lca = 0;
    while (lca + 1 < pi_.size() && lca + 1 < pj_.size() && pi_[lca + 1] == pj_[lca + 1])
      ++lca;
    term.root_path = dirs_of(std::vector<int>(pi_.begin(), pi_.begin() + lca + 1), 0);
    term.down_i = dirs_of(pi_, lca);
    term.down_j = dirs_of(pj_, lca);
  }
  // family-specific canonicalization
  if (fam.kind == FamilyKind::dep_ie || fam.kind == FamilyKind::dep_ies) {
    std::fill(term.down_i.begin(), term.down_i.end(), 0);
    std::fill(term.root_path.begin(), term.root_path.end(), 0);
    std::fill(term.down_j.begin(), term.down_j.end(), 0);
  }
  if (fam.kind == FamilyKind::dep_ies) term.root_path.clear();
  return term;
}

}  // namespace

DepMixing::DepMixing(const ModelFamily& family, const ObservationSpec& spec,
                     std::vector<int> lengths)
    : fam_(family) {
  if (!fam_.is_dependency())
    throw UnsupportedError("DepMixing takes a dependency family");
  if (spec.family != ObsFamily::pairs && spec.family != ObsFamily::all_pairs &&
      spec.family != ObsFamily::first_moment)
    throw UnsupportedError("dependency mixing covers pair and first-moment observations");
  std::sort(lengths.begin(), lengths.end());
  for (int L : lengths)
    if (L > 4)
      throw UnsupportedError("dependency mixing enumerates topologies for L <= 4");

  for (int L : lengths) {
    auto topos = enumerate_topologies(TopologyKind::dependency, L);
    long denom = static_cast<long>(topos.size());
    for (const auto& o : enumerate_observations(spec, L)) {
      std::vector<std::pair<int, long>> row;
      for (const auto& t : topos) {
        DepTerm term = dep_term_for(fam_, t, o);
        auto it = col_of_.find(term);
        int col;
        if (it == col_of_.end()) {
          col = static_cast<int>(cols_.size());
          col_of_[term] = col;
          cols_.push_back(term);
        } else {
          col = it->second;
        }
        bool found = false;
        for (auto& [c, n] : row)
          if (c == col) {
            ++n;
            found = true;
            break;
          }
        if (!found) row.push_back({col, 1});
      }
      m_.rows_exact.push_back(std::move(row));
      m_.row_labels.push_back({L, pattern_label(o)});
      m_.row_denoms.push_back(denom);
    }
  }
  for (const auto& t : cols_) m_.col_labels.push_back(t.to_string());
  m_.M = Matrix::Zero(m_.rows(), m_.cols());
  for (int r = 0; r < m_.rows(); ++r)
    for (const auto& [c, count] : m_.rows_exact[r])
      m_.M(r, c) = static_cast<double>(count) / static_cast<double>(m_.row_denoms[r]);
}

Matrix DepMixing::eval_column(int col, const ModelParams& params) const {
  const DepTerm& t = cols_.at(col);
  int d = params.family.d;
  auto prod = [&](const std::vector<int>& seq) {
    Matrix P = Matrix::Identity(d, d);
    for (int dir : seq) P = (dir == 0 ? params.left_arg() : params.right_arg()) * P;
    return P;
  };
  if (!t.pair) return prod(t.down_i) * params.pi;
  Vector root = prod(t.root_path) * params.pi;
  return prod(t.down_i) * root.asDiagonal() * prod(t.down_j).transpose();
}

MixingMatrix mixing_matrix(const ModelFamily& family, const ObservationSpec& spec,
                           const std::vector<int>& lengths) {
  if (family.kind == FamilyKind::pcfg_ie)
    return PcfgIeMixing(spec, lengths).matrix();
  if (family.is_dependency()) return DepMixing(family, spec, lengths).matrix();
  throw UnsupportedError(
      "mixing supports PCFG-IE and dependency families only (PCFG-I backbones "
      "multiply with edge interleavings)");
}

}  // namespace lunmix
