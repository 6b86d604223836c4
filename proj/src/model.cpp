#include "lunmix/model.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

namespace lunmix {

namespace {

constexpr int kMaxConstituencyL = 12;
constexpr int kMaxDependencyL = 8;
constexpr double kColumnSumTol = 1e-12;
constexpr double kStationaryTol = 1e-10;

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

void check_stochastic(const Matrix& m, const std::string& name) {
  for (int c = 0; c < m.cols(); ++c) {
    double sum = m.col(c).sum();
    if (std::abs(sum - 1.0) > kColumnSumTol) {
      std::ostringstream os;
      os << name << " column " << c << " sums to " << sum << ", expected 1";
      throw DimensionError(os.str());
    }
    for (int r = 0; r < m.rows(); ++r) {
      if (m(r, c) < 0.0 || m(r, c) > 1.0) {
        std::ostringstream os;
        os << name << "(" << r << "," << c << ") = " << m(r, c)
           << " outside [0,1]";
        throw DimensionError(os.str());
      }
    }
  }
}

// Normalize and rewrite the last entry as 1 - sum(head) so that
// vectorize/unvectorize round-trips are bit-exact.
void normalize_column(Eigen::Ref<Vector> col) {
  col /= col.sum();
  int n = static_cast<int>(col.size());
  double head = 0.0;
  for (int i = 0; i + 1 < n; ++i) head += col(i);
  col(n - 1) = 1.0 - head;
}

int sample_index(const Eigen::Ref<const Vector>& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (r < acc) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

void ModelFamily::validate() const {
  if (is_dependency()) {
    require(d >= 1, "dependency family needs d >= 1");
    require(k == 0, "dependency families have no hidden-state dimension");
  } else {
    require(k >= 1, "k >= 1 required");
    require(d >= 1, "d >= 1 required");
  }
}

std::string family_name(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::pcfg: return "pcfg";
    case FamilyKind::pcfg_i: return "pcfg-i";
    case FamilyKind::pcfg_ie: return "pcfg-ie";
    case FamilyKind::dep_i: return "dep-i";
    case FamilyKind::dep_ie: return "dep-ie";
    case FamilyKind::dep_ies: return "dep-ies";
    case FamilyKind::hmm: return "hmm";
    case FamilyKind::lcm: return "lcm";
  }
  return "?";
}

FamilyKind parse_family(const std::string& name) {
  std::string s;
  for (char c : name)
    if (c != '-' && c != '_') s += static_cast<char>(std::tolower(c));
  if (s == "pcfg") return FamilyKind::pcfg;
  if (s == "pcfgi") return FamilyKind::pcfg_i;
  if (s == "pcfgie") return FamilyKind::pcfg_ie;
  if (s == "depi") return FamilyKind::dep_i;
  if (s == "depie") return FamilyKind::dep_ie;
  if (s == "depies") return FamilyKind::dep_ies;
  if (s == "hmm") return FamilyKind::hmm;
  if (s == "lcm") return FamilyKind::lcm;
  throw ConfigError("unknown model family: " + name);
}

Matrix column_tensor(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "column_tensor: column count mismatch");
  Matrix out(a.rows() * b.rows(), a.cols());
  for (int j = 0; j < a.cols(); ++j)
    for (int i1 = 0; i1 < a.rows(); ++i1)
      for (int i2 = 0; i2 < b.rows(); ++i2)
        out(i1 * b.rows() + i2, j) = a(i1, j) * b(i2, j);
  return out;
}

Matrix ModelParams::production() const {
  switch (family.kind) {
    case FamilyKind::pcfg: return B;
    case FamilyKind::pcfg_i: return column_tensor(T1, T2);
    case FamilyKind::pcfg_ie: return column_tensor(T, T);
    default: throw UnsupportedError("production() only defined for PCFG families");
  }
}

const Matrix& ModelParams::left_arg() const {
  return family.kind == FamilyKind::dep_i ? A_left : A;
}

const Matrix& ModelParams::right_arg() const {
  return family.kind == FamilyKind::dep_i ? A_right : A;
}

void ModelParams::validate() const {
  family.validate();
  int k = family.k, d = family.d;
  switch (family.kind) {
    case FamilyKind::pcfg:
      require(pi.size() == k && B.rows() == k * k && B.cols() == k &&
                  O.rows() == d && O.cols() == k,
              "pcfg parameter dimensions");
      check_stochastic(B, "B");
      check_stochastic(O, "O");
      break;
    case FamilyKind::pcfg_i:
      require(pi.size() == k && T1.rows() == k && T1.cols() == k &&
                  T2.rows() == k && T2.cols() == k && O.rows() == d &&
                  O.cols() == k,
              "pcfg-i parameter dimensions");
      check_stochastic(T1, "T1");
      check_stochastic(T2, "T2");
      check_stochastic(O, "O");
      break;
    case FamilyKind::pcfg_ie:
    case FamilyKind::hmm:
      require(pi.size() == k && T.rows() == k && T.cols() == k &&
                  O.rows() == d && O.cols() == k,
              family_name(family.kind) + " parameter dimensions");
      check_stochastic(T, "T");
      check_stochastic(O, "O");
      break;
    case FamilyKind::lcm:
      require(pi.size() == k && O.rows() == d && O.cols() == k,
              "lcm parameter dimensions");
      check_stochastic(O, "O");
      break;
    case FamilyKind::dep_i:
      require(pi.size() == d && A_left.rows() == d && A_left.cols() == d &&
                  A_right.rows() == d && A_right.cols() == d,
              "dep-i parameter dimensions");
      check_stochastic(A_left, "A_left");
      check_stochastic(A_right, "A_right");
      break;
    case FamilyKind::dep_ie:
    case FamilyKind::dep_ies:
      require(pi.size() == d && A.rows() == d && A.cols() == d,
              family_name(family.kind) + " parameter dimensions");
      check_stochastic(A, "A");
      break;
  }
  check_stochastic(pi, "pi");
  if (family.kind == FamilyKind::dep_ies) {
    double err = (A * pi - pi).lpNorm<Eigen::Infinity>();
    if (err > kStationaryTol) {
      std::ostringstream os;
      os << "dep-ies pi is not stationary: |A pi - pi| = " << err;
      throw DimensionError(os.str());
    }
  }
}

ModelParams random_params(ModelFamily family, Rng& rng) {
  family.validate();
  ModelParams p;
  p.family = family;
  int k = family.k, d = family.d;
  auto stoch = [&](int rows, int cols) {
    Matrix m = random_stochastic(rows, cols, rng);
    for (int c = 0; c < cols; ++c) normalize_column(m.col(c));
    return m;
  };
  switch (family.kind) {
    case FamilyKind::pcfg:
      p.pi = stoch(k, 1);
      p.B = stoch(k * k, k);
      p.O = stoch(d, k);
      break;
    case FamilyKind::pcfg_i:
      p.pi = stoch(k, 1);
      p.T1 = stoch(k, k);
      p.T2 = stoch(k, k);
      p.O = stoch(d, k);
      break;
    case FamilyKind::pcfg_ie:
    case FamilyKind::hmm:
      p.pi = stoch(k, 1);
      p.T = stoch(k, k);
      p.O = stoch(d, k);
      break;
    case FamilyKind::lcm:
      p.pi = stoch(k, 1);
      p.O = stoch(d, k);
      break;
    case FamilyKind::dep_i:
      p.pi = stoch(d, 1);
      p.A_left = stoch(d, d);
      p.A_right = stoch(d, d);
      break;
    case FamilyKind::dep_ie:
      p.pi = stoch(d, 1);
      p.A = stoch(d, d);
      break;
    case FamilyKind::dep_ies:
      p.A = stoch(d, d);
      p.pi = stationary_distribution(p.A);
      break;
  }
  return p;
}

int Topology::split_for(int i, int j) const {
  for (const auto& s : splits)
    if (s[0] == i && s[2] == j) return s[1];
  throw DimensionError("no split recorded for span");
}

namespace {

// Binary bracketings of [lo, hi].
std::vector<std::vector<std::array<int, 3>>> bracketings(int lo, int hi) {
  std::vector<std::vector<std::array<int, 3>>> out;
  if (hi - lo == 1) {
    out.emplace_back();
    return out;
  }
  for (int m = lo + 1; m < hi; ++m) {
    auto lefts = bracketings(lo, m);
    auto rights = bracketings(m, hi);
    for (const auto& l : lefts)
      for (const auto& r : rights) {
        std::vector<std::array<int, 3>> s;
        s.push_back({lo, m, hi});
        s.insert(s.end(), l.begin(), l.end());
        s.insert(s.end(), r.begin(), r.end());
        out.push_back(std::move(s));
      }
  }
  return out;
}

struct DepTree {
  int root;
  std::vector<std::pair<int, int>> edges;
};

std::vector<DepTree> dep_trees(int lo, int hi);

// All ways to cover [lo, hi] with consecutive projective blocks; returns the
// block roots (in position order) together with the internal edges.
std::vector<DepTree> dep_forests(int lo, int hi) {
  std::vector<DepTree> out;  // root field unused; edges + roots packed below
  struct Forest {
    std::vector<int> roots;
    std::vector<std::pair<int, int>> edges;
  };
  std::vector<Forest> forests;
  if (lo > hi) {
    forests.push_back({});
  } else {
    for (int m = lo; m <= hi; ++m) {
      auto firsts = dep_trees(lo, m);
      // rest of the interval
      std::vector<Forest> rests;
      if (m == hi) {
        rests.push_back({});
      } else {
        // recurse through the same function; rebuild Forest list
        auto sub = dep_forests(m + 1, hi);
        for (auto& t : sub) {
          Forest f;
          // dep_forests packs roots into edges with head = 0 sentinel
          for (auto& e : t.edges) {
            if (e.first == 0)
              f.roots.push_back(e.second);
            else
              f.edges.push_back(e);
          }
          rests.push_back(std::move(f));
        }
      }
      for (const auto& first : firsts)
        for (const auto& rest : rests) {
          Forest f;
          f.roots.push_back(first.root);
          f.roots.insert(f.roots.end(), rest.roots.begin(), rest.roots.end());
          f.edges = first.edges;
          f.edges.insert(f.edges.end(), rest.edges.begin(), rest.edges.end());
          forests.push_back(std::move(f));
        }
    }
  }
  for (auto& f : forests) {
    DepTree t;
    t.root = 0;
    for (int r : f.roots) t.edges.push_back({0, r});  // sentinel head 0
    t.edges.insert(t.edges.end(), f.edges.begin(), f.edges.end());
    out.push_back(std::move(t));
  }
  return out;
}

// Projective trees over [lo, hi]: for each root r, tile both sides with
// block subtrees whose roots attach to r.
std::vector<DepTree> dep_trees(int lo, int hi) {
  std::vector<DepTree> out;
  if (lo > hi) return out;
  for (int r = lo; r <= hi; ++r) {
    auto lefts = dep_forests(lo, r - 1);
    auto rights = dep_forests(r + 1, hi);
    for (const auto& lf : lefts)
      for (const auto& rf : rights) {
        DepTree t;
        t.root = r;
        auto absorb = [&](const DepTree& f) {
          for (auto& e : f.edges) {
            if (e.first == 0)
              t.edges.push_back({r, e.second});  // block root attaches to r
            else
              t.edges.push_back(e);
          }
        };
        absorb(lf);
        absorb(rf);
        std::sort(t.edges.begin(), t.edges.end(),
                  [](auto& a, auto& b) { return a.second < b.second; });
        out.push_back(std::move(t));
      }
  }
  return out;
}

long count_constituency(int L) {
  // Catalan-style counting DP over span widths.
  std::vector<long> c(L + 1, 0);
  c[1] = 1;
  for (int w = 2; w <= L; ++w)
    for (int m = 1; m < w; ++m) c[w] += c[m] * c[w - m];
  return c[L];
}

long count_dependency(int L) {
  // trees[w]: projective trees over a window of width w; forests[w]: block
  // tilings of a width-w window.
  std::vector<long> trees(L + 1, 0), forests(L + 1, 0);
  forests[0] = 1;
  for (int w = 1; w <= L; ++w) {
    long t = 0;
    for (int left = 0; left < w; ++left) t += forests[left] * forests[w - 1 - left];
    trees[w] = t;
    long f = 0;
    for (int first = 1; first <= w; ++first) f += trees[first] * forests[w - first];
    forests[w] = f;
  }
  return trees[L];
}

}  // namespace

std::vector<Topology> enumerate_topologies(TopologyKind kind, int L) {
  if (L < 1) throw ConfigError("L >= 1 required");
  std::vector<Topology> out;
  switch (kind) {
    case TopologyKind::constituency: {
      if (L > kMaxConstituencyL)
        throw EnumerationError("enumeration too large: constituency L > 12");
      for (auto& s : bracketings(0, L)) {
        Topology t;
        t.kind = kind;
        t.length = L;
        t.splits = std::move(s);
        std::sort(t.splits.begin(), t.splits.end());
        out.push_back(std::move(t));
      }
      break;
    }
    case TopologyKind::dependency: {
      if (L > kMaxDependencyL)
        throw EnumerationError("enumeration too large: dependency L > 8");
      for (auto& dt : dep_trees(1, L)) {
        Topology t;
        t.kind = kind;
        t.length = L;
        t.edges = dt.edges;
        t.root = dt.root;
        out.push_back(std::move(t));
      }
      break;
    }
    case TopologyKind::chain: {
      Topology t;
      t.kind = kind;
      t.length = L;
      out.push_back(std::move(t));
      break;
    }
  }
  return out;
}

long topology_count(TopologyKind kind, int L) {
  if (L < 1) throw ConfigError("L >= 1 required");
  switch (kind) {
    case TopologyKind::constituency: return count_constituency(L);
    case TopologyKind::dependency: return count_dependency(L);
    case TopologyKind::chain: return 1;
  }
  return 0;
}

bool is_projective(const std::vector<std::pair<int, int>>& edges, int root, int L) {
  if (root < 1 || root > L) return false;
  std::vector<int> parent(L + 1, 0);
  std::vector<std::vector<int>> children(L + 1);
  if (static_cast<int>(edges.size()) != L - 1) return false;
  for (auto& [h, c] : edges) {
    if (h < 1 || h > L || c < 1 || c > L || c == root || parent[c] != 0) return false;
    parent[c] = h;
    children[h].push_back(c);
  }
  // reachability from the root
  std::vector<bool> seen(L + 1, false);
  std::vector<int> stack = {root};
  int visited = 0;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (seen[v]) return false;
    seen[v] = true;
    ++visited;
    for (int c : children[v]) stack.push_back(c);
  }
  if (visited != L) return false;
  // contiguous yields
  std::vector<int> lo(L + 1), hi(L + 1), size(L + 1, 1);
  for (int v = 1; v <= L; ++v) lo[v] = hi[v] = v;
  // process nodes bottom-up by repeated relaxation (L is small)
  for (int pass = 0; pass < L; ++pass)
    for (auto& [h, c] : edges) {
      lo[h] = std::min(lo[h], lo[c]);
      hi[h] = std::max(hi[h], hi[c]);
    }
  std::vector<int> count(L + 1, 0);
  // subtree sizes via reverse topological accumulation
  std::vector<int> order;
  order.reserve(L);
  stack = {root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (int c : children[v]) stack.push_back(c);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (int c : children[*it]) size[*it] += size[c];
  for (int v = 1; v <= L; ++v)
    if (hi[v] - lo[v] + 1 != size[v]) return false;
  return true;
}

std::vector<std::pair<int, int>> constituency_nodes(const Topology& topo) {
  std::vector<std::pair<int, int>> nodes;
  for (int i = 0; i < topo.length; ++i) nodes.push_back({i, i + 1});
  for (const auto& s : topo.splits) nodes.push_back({s[0], s[2]});
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

double joint_prob(const ModelParams& params, const Sentence& x, const ParseTree& z) {
  const ModelFamily& fam = params.family;
  int L = x.length();
  if (z.topo.length != L) throw DimensionError("sentence/topology length mismatch");
  for (int w : x.words)
    if (w < 1 || w > fam.d) throw DimensionError("word id outside [1, d]");
  double trees = static_cast<double>(topology_count(fam.topology_kind(), L));

  if (fam.is_constituency()) {
    auto nodes = constituency_nodes(z.topo);
    if (z.states.size() != nodes.size())
      throw DimensionError("state count does not match node count");
    std::map<std::pair<int, int>, int> state;
    for (size_t i = 0; i < nodes.size(); ++i) state[nodes[i]] = z.states[i];
    int k = fam.k;
    Matrix prod = params.production();
    double p = params.pi(state[{0, L}]) / trees;
    for (const auto& s : z.topo.splits) {
      int sl = state[{s[0], s[1]}], sr = state[{s[1], s[2]}], sp = state[{s[0], s[2]}];
      p *= prod(sl * k + sr, sp);
    }
    for (int i = 1; i <= L; ++i) p *= params.O(x.words[i - 1] - 1, state[{i - 1, i}]);
    return p;
  }
  if (fam.is_dependency()) {
    double p = params.pi(x.words[z.topo.root - 1] - 1) / trees;
    for (auto& [h, c] : z.topo.edges) {
      const Matrix& arg = c < h ? params.left_arg() : params.right_arg();
      p *= arg(x.words[c - 1] - 1, x.words[h - 1] - 1);
    }
    return p;
  }
  if (fam.kind == FamilyKind::hmm) {
    if (static_cast<int>(z.states.size()) != L)
      throw DimensionError("hmm needs one state per position");
    double p = params.pi(z.states[0]);
    for (int i = 0; i < L; ++i) {
      p *= params.O(x.words[i] - 1, z.states[i]);
      if (i + 1 < L) p *= params.T(z.states[i + 1], z.states[i]);
    }
    return p;
  }
  // LCM: one shared state
  if (z.states.size() != 1) throw DimensionError("lcm takes a single state");
  double p = params.pi(z.states[0]);
  for (int i = 0; i < L; ++i) p *= params.O(x.words[i] - 1, z.states[0]);
  return p;
}

std::vector<ParseTree> enumerate_parse_trees(const ModelFamily& family, int L) {
  std::vector<ParseTree> out;
  auto topos = enumerate_topologies(family.topology_kind(), L);
  if (family.is_dependency()) {
    for (auto& t : topos) out.push_back({t, {}});
    return out;
  }
  int k = family.k;
  int num_states = 0;
  if (family.is_constituency())
    num_states = 2 * L - 1;
  else if (family.kind == FamilyKind::hmm)
    num_states = L;
  else
    num_states = 1;
  long combos = 1;
  for (int i = 0; i < num_states; ++i) combos *= k;
  for (auto& t : topos) {
    for (long code = 0; code < combos; ++code) {
      std::vector<int> states(num_states);
      long c = code;
      for (int i = 0; i < num_states; ++i) {
        states[i] = static_cast<int>(c % k);
        c /= k;
      }
      out.push_back({t, states});
    }
  }
  return out;
}

std::vector<Sentence> all_sentences(int d, int L) {
  std::vector<Sentence> out;
  long total = 1;
  for (int i = 0; i < L; ++i) total *= d;
  for (long code = 0; code < total; ++code) {
    Sentence s;
    s.words.resize(L);
    long c = code;
    for (int i = 0; i < L; ++i) {
      s.words[i] = static_cast<int>(c % d) + 1;
      c /= d;
    }
    out.push_back(std::move(s));
  }
  return out;
}

double marginal_prob(const ModelParams& params, const Sentence& x) {
  double total = 0.0;
  for (const auto& z : enumerate_parse_trees(params.family, x.length()))
    total += joint_prob(params, x, z);
  return total;
}

Sentence sample_sentence(const ModelParams& params, int L, Rng& rng) {
  const ModelFamily& fam = params.family;
  params.validate();
  Sentence x;
  x.words.assign(L, 0);

  if (fam.is_chain()) {
    int z = sample_index(params.pi, rng);
    for (int i = 0; i < L; ++i) {
      x.words[i] = sample_index(params.O.col(z), rng) + 1;
      if (fam.kind == FamilyKind::hmm && i + 1 < L)
        z = sample_index(params.T.col(z), rng);
    }
    return x;
  }

  auto topos = enumerate_topologies(fam.topology_kind(), L);
  std::uniform_int_distribution<size_t> pick(0, topos.size() - 1);
  const Topology& topo = topos[pick(rng)];

  if (fam.is_constituency()) {
    int k = fam.k;
    std::map<std::pair<int, int>, int> state;
    state[{0, L}] = sample_index(params.pi, rng);
    auto splits = topo.splits;
    std::sort(splits.begin(), splits.end(), [](auto& a, auto& b) {
      return (a[2] - a[0]) > (b[2] - b[0]);
    });
    for (const auto& s : splits) {
      int parent = state[{s[0], s[2]}];
      int left, right;
      switch (fam.kind) {
        case FamilyKind::pcfg: {
          int idx = sample_index(params.B.col(parent), rng);
          left = idx / k;
          right = idx % k;
          break;
        }
        case FamilyKind::pcfg_i:
          left = sample_index(params.T1.col(parent), rng);
          right = sample_index(params.T2.col(parent), rng);
          break;
        default:
          left = sample_index(params.T.col(parent), rng);
          right = sample_index(params.T.col(parent), rng);
          break;
      }
      state[{s[0], s[1]}] = left;
      state[{s[1], s[2]}] = right;
    }
    for (int i = 1; i <= L; ++i)
      x.words[i - 1] = sample_index(params.O.col(state[{i - 1, i}]), rng) + 1;
    return x;
  }

  // dependency
  std::vector<std::vector<int>> children(L + 1);
  for (auto& [h, c] : topo.edges) children[h].push_back(c);
  for (auto& ch : children) std::sort(ch.begin(), ch.end());
  x.words[topo.root - 1] = sample_index(params.pi, rng) + 1;
  std::vector<int> stack = {topo.root};
  while (!stack.empty()) {
    int h = stack.back();
    stack.pop_back();
    for (int c : children[h]) {
      const Matrix& arg = c < h ? params.left_arg() : params.right_arg();
      x.words[c - 1] = sample_index(arg.col(x.words[h - 1] - 1), rng) + 1;
      stack.push_back(c);
    }
  }
  return x;
}

Vector stationary_distribution(const Matrix& A) {
  int d = static_cast<int>(A.rows());
  if (A.cols() != d) throw DimensionError("stationary_distribution needs square A");
  check_stochastic(A, "A");
  Matrix M = A - Matrix::Identity(d, d);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() > 0 ? sv(0) : 0.0;
  double tol = 1e-10 * std::max(1.0, smax);
  int nullity = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) <= tol) ++nullity;
  if (d == 1) {
    Vector pi(1);
    pi(0) = 1.0;
    return pi;
  }
  if (nullity != 1)
    throw ConditioningError(
        "stationary distribution not unique (reducible A); perturb A");
  Vector v = svd.matrixV().col(d - 1);
  double s = v.sum();
  if (std::abs(s) < 1e-12)
    throw ConditioningError("stationary solve degenerate; perturb A");
  Vector pi = v / s;
  for (int i = 0; i < d; ++i) {
    if (pi(i) < -1e-10) throw ConditioningError("stationary vector has negative mass");
    pi(i) = std::max(pi(i), 0.0);
  }
  normalize_column(pi);
  double err = (A * pi - pi).lpNorm<Eigen::Infinity>();
  if (err > kStationaryTol)
    throw ConditioningError("stationary residual too large; perturb A");
  return pi;
}

std::vector<ParamBlock> param_blocks(const ModelFamily& family) {
  int k = family.k, d = family.d;
  std::vector<ParamBlock> blocks;
  switch (family.kind) {
    case FamilyKind::pcfg:
      blocks = {{"pi", k, 1}, {"B", k * k, k}, {"O", d, k}};
      break;
    case FamilyKind::pcfg_i:
      blocks = {{"pi", k, 1}, {"T1", k, k}, {"T2", k, k}, {"O", d, k}};
      break;
    case FamilyKind::pcfg_ie:
    case FamilyKind::hmm:
      blocks = {{"pi", k, 1}, {"T", k, k}, {"O", d, k}};
      break;
    case FamilyKind::lcm:
      blocks = {{"pi", k, 1}, {"O", d, k}};
      break;
    case FamilyKind::dep_i:
      blocks = {{"pi", d, 1}, {"A_left", d, d}, {"A_right", d, d}};
      break;
    case FamilyKind::dep_ie:
      blocks = {{"pi", d, 1}, {"A", d, d}};
      break;
    case FamilyKind::dep_ies:
      blocks = {{"pi", d, 1, false}, {"A", d, d}};
      break;
  }
  int off = 0;
  for (auto& b : blocks) {
    b.raw_offset = off;
    off += b.rows * b.cols;
  }
  return blocks;
}

int raw_dim(const ModelFamily& family) {
  int n = 0;
  for (const auto& b : param_blocks(family)) n += b.rows * b.cols;
  return n;
}

int free_dim(const ModelFamily& family) {
  int n = 0;
  for (const auto& b : param_blocks(family))
    if (b.free) n += (b.rows - 1) * b.cols;
  return n;
}

namespace {

const Matrix& block_matrix(const ModelParams& p, const std::string& name) {
  static const Matrix empty;
  if (name == "B") return p.B;
  if (name == "T") return p.T;
  if (name == "T1") return p.T1;
  if (name == "T2") return p.T2;
  if (name == "O") return p.O;
  if (name == "A") return p.A;
  if (name == "A_left") return p.A_left;
  if (name == "A_right") return p.A_right;
  return empty;
}

Matrix& block_matrix(ModelParams& p, const std::string& name) {
  return const_cast<Matrix&>(block_matrix(static_cast<const ModelParams&>(p), name));
}

}  // namespace

Vector raw_vector(const ModelParams& params) {
  auto blocks = param_blocks(params.family);
  Vector raw(raw_dim(params.family));
  for (const auto& b : blocks) {
    if (b.name == "pi") {
      raw.segment(b.raw_offset, b.rows) = params.pi;
      continue;
    }
    const Matrix& m = block_matrix(params, b.name);
    for (int c = 0; c < b.cols; ++c)
      raw.segment(b.raw_offset + c * b.rows, b.rows) = m.col(c);
  }
  return raw;
}

ModelParams params_from_raw(const ModelFamily& family, const Vector& raw) {
  if (raw.size() != raw_dim(family))
    throw DimensionError("raw vector has wrong length");
  ModelParams p;
  p.family = family;
  for (const auto& b : param_blocks(family)) {
    if (b.name == "pi") {
      p.pi = raw.segment(b.raw_offset, b.rows);
      continue;
    }
    Matrix m(b.rows, b.cols);
    for (int c = 0; c < b.cols; ++c)
      m.col(c) = raw.segment(b.raw_offset + c * b.rows, b.rows);
    block_matrix(p, b.name) = m;
  }
  return p;
}

Vector vectorize_params(const ModelParams& params) {
  Vector raw = raw_vector(params);
  Vector theta(free_dim(params.family));
  int t = 0;
  for (const auto& b : param_blocks(params.family)) {
    if (!b.free) continue;
    for (int c = 0; c < b.cols; ++c)
      for (int r = 0; r + 1 < b.rows; ++r)
        theta(t++) = raw(b.raw_offset + c * b.rows + r);
  }
  return theta;
}

ModelParams unvectorize_params(const ModelFamily& family, const Vector& theta) {
  if (theta.size() != free_dim(family))
    throw DimensionError("free vector has wrong length");
  Vector raw = Vector::Zero(raw_dim(family));
  int t = 0;
  for (const auto& b : param_blocks(family)) {
    if (!b.free) continue;
    for (int c = 0; c < b.cols; ++c) {
      double head = 0.0;
      for (int r = 0; r + 1 < b.rows; ++r) {
        double v = theta(t++);
        if (v < 0.0 || v > 1.0)
          throw DimensionError("unvectorize: entry outside [0,1]");
        raw(b.raw_offset + c * b.rows + r) = v;
        head += v;
      }
      double last = 1.0 - head;
      if (last < 0.0 || last > 1.0)
        throw DimensionError("unvectorize: implied last entry outside [0,1]");
      raw(b.raw_offset + c * b.rows + b.rows - 1) = last;
    }
  }
  ModelParams p = params_from_raw(family, raw);
  if (family.kind == FamilyKind::dep_ies) p.pi = stationary_distribution(p.A);
  return p;
}

}  // namespace lunmix
