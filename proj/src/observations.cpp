#include "lunmix/observations.hpp"

#include <algorithm>
#include <sstream>

namespace lunmix {

std::string obs_family_name(ObsFamily f) {
  switch (f) {
    case ObsFamily::pairs: return "pairs";
    case ObsFamily::all_pairs: return "all-pairs";
    case ObsFamily::thin_triples: return "thin-triples";
    case ObsFamily::triples: return "triples";
    case ObsFamily::all_thin_triples: return "all-thin-triples";
    case ObsFamily::all_triples: return "all-triples";
    case ObsFamily::first_moment: return "first-moment";
  }
  return "?";
}

ObsFamily parse_obs_family(const std::string& name) {
  std::string s;
  for (char c : name)
    if (c != '-' && c != '_') s += static_cast<char>(std::tolower(c));
  if (s == "pairs") return ObsFamily::pairs;
  if (s == "allpairs") return ObsFamily::all_pairs;
  if (s == "thintriples") return ObsFamily::thin_triples;
  if (s == "triples") return ObsFamily::triples;
  if (s == "allthintriples") return ObsFamily::all_thin_triples;
  if (s == "alltriples") return ObsFamily::all_triples;
  if (s == "firstmoment" || s == "first") return ObsFamily::first_moment;
  throw ConfigError("unknown observation family: " + name);
}

Eta eta_ones(int d) { return {"ones", Vector::Ones(d)}; }

Eta eta_e1(int d) {
  Vector v = Vector::Zero(d);
  v(0) = 1.0;
  return {"e1", v};
}

Eta eta_tau(int d, uint64_t seed) {
  Rng rng(mix_seed(seed, 0x7a75));
  return {"tau", uniform_vector(d, rng)};
}

int ObsId::arity() const {
  switch (kind) {
    case Kind::first: return 1;
    case Kind::pair: return 2;
    default: return 3;
  }
}

int ObsId::flat_size(int d) const {
  switch (kind) {
    case Kind::first: return d;
    case Kind::pair:
    case Kind::thin_triple: return d * d;
    case Kind::triple: return d * d * d;
  }
  return 0;
}

std::string ObsId::name(const std::vector<Eta>& etas) const {
  std::ostringstream os;
  int n = arity();
  bool wide = false;
  for (int i = 0; i < n; ++i) wide = wide || pos[i] > 9;
  for (int i = 0; i < n; ++i) {
    if (i > 0 && wide) os << '.';
    os << pos[i];
  }
  if (kind == Kind::thin_triple) {
    os << "eta";
    os << (eta >= 0 && eta < static_cast<int>(etas.size()) ? etas[eta].tag
                                                           : std::to_string(eta));
  } else if (kind == Kind::triple) {
    os << "T";
  }
  return os.str();
}

ObservationSpec ObservationSpec::make(ObsFamily family, std::vector<Eta> etas) {
  ObservationSpec spec;
  spec.family = family;
  spec.etas = std::move(etas);
  bool thin = family == ObsFamily::thin_triples || family == ObsFamily::all_thin_triples;
  if (thin && spec.etas.empty())
    throw ConfigError("thin-triple observation families need at least one eta");
  if (!thin && !spec.etas.empty())
    throw ConfigError("only thin-triple families carry an eta");
  return spec;
}

std::vector<ObsId> enumerate_observations(const ObservationSpec& spec, int L) {
  std::vector<ObsId> out;
  auto add_thin_patterns = [&](int i, int j, int k) {
    for (int e = 0; e < static_cast<int>(spec.etas.size()); ++e)
      out.push_back({ObsId::Kind::thin_triple, {i, j, k}, e});
  };
  switch (spec.family) {
    case ObsFamily::first_moment:
      out.push_back({ObsId::Kind::first, {1, 0, 0}});
      break;
    case ObsFamily::pairs:
      if (L >= 2) out.push_back({ObsId::Kind::pair, {1, 2, 0}});
      break;
    case ObsFamily::all_pairs:
      for (int i = 1; i <= L; ++i)
        for (int j = i + 1; j <= L; ++j)
          out.push_back({ObsId::Kind::pair, {i, j, 0}});
      break;
    case ObsFamily::triples:
      if (L >= 3) out.push_back({ObsId::Kind::triple, {1, 2, 3}});
      break;
    case ObsFamily::all_triples:
      for (int i = 1; i <= L; ++i)
        for (int j = i + 1; j <= L; ++j)
          for (int k = j + 1; k <= L; ++k)
            out.push_back({ObsId::Kind::triple, {i, j, k}});
      break;
    case ObsFamily::thin_triples:
      // The three eta-projected patterns over positions {1,2,3}.
      if (L >= 3) {
        add_thin_patterns(1, 2, 3);
        add_thin_patterns(1, 3, 2);
        add_thin_patterns(2, 3, 1);
      }
      break;
    case ObsFamily::all_thin_triples:
      // For every position triple {a,b,c}: each element takes the projected
      // slot once, the designated pair stays ordered.
      for (int a = 1; a <= L; ++a)
        for (int b = a + 1; b <= L; ++b)
          for (int c = b + 1; c <= L; ++c) {
            add_thin_patterns(a, b, c);
            add_thin_patterns(a, c, b);
            add_thin_patterns(b, c, a);
          }
      break;
  }
  return out;
}

Vector eval_phi(const ObsId& o, const std::vector<Eta>& etas, const Sentence& x,
                int d) {
  int L = x.length();
  for (int i = 0; i < o.arity(); ++i) {
    if (o.pos[i] < 1 || o.pos[i] > L)
      throw DimensionError("observation position out of range");
    int word = x.words[o.pos[i] - 1];
    if (word < 1 || word > d) throw DimensionError("word id outside [1, d]");
  }
  Vector out = Vector::Zero(o.flat_size(d));
  auto w = [&](int slot) { return x.words[o.pos[slot] - 1] - 1; };
  switch (o.kind) {
    case ObsId::Kind::first:
      out(w(0)) = 1.0;
      break;
    case ObsId::Kind::pair:
      out(w(0) * d + w(1)) = 1.0;
      break;
    case ObsId::Kind::thin_triple: {
      if (o.eta < 0 || o.eta >= static_cast<int>(etas.size()))
        throw ConfigError("thin triple refers to a missing eta");
      out(w(0) * d + w(1)) = etas[o.eta].v(w(2));
      break;
    }
    case ObsId::Kind::triple:
      out((w(0) * d + w(1)) * d + w(2)) = 1.0;
      break;
  }
  return out;
}

int MomentSet::rows() const {
  int n = 0;
  for (int L : lengths) {
    auto it = values.find(L);
    if (it == values.end()) continue;
    for (const auto& v : it->second) n += static_cast<int>(v.size());
  }
  return n;
}

Vector MomentSet::stacked() const {
  Vector out(rows());
  int at = 0;
  for (int L : lengths) {
    auto it = values.find(L);
    if (it == values.end()) continue;
    for (const auto& v : it->second) {
      out.segment(at, v.size()) = v;
      at += static_cast<int>(v.size());
    }
  }
  return out;
}

Matrix MomentSet::as_matrix(int L, int obs_index) const {
  const Vector& v = flat(L, obs_index);
  if (v.size() != d * d) throw DimensionError("moment is not a d x d matrix");
  Matrix m(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) m(a, b) = v(a * d + b);
  return m;
}

const Vector& MomentSet::flat(int L, int obs_index) const {
  auto it = values.find(L);
  if (it == values.end() || obs_index >= static_cast<int>(it->second.size()))
    throw DimensionError("no moment stored for that length/observation");
  return it->second[obs_index];
}

MomentSet empirical_moments(const std::vector<Sentence>& samples,
                            const ObservationSpec& spec, int d,
                            const std::vector<int>& lengths) {
  MomentSet ms;
  ms.spec = spec;
  ms.d = d;
  ms.lengths = lengths;
  std::sort(ms.lengths.begin(), ms.lengths.end());
  std::map<int, std::vector<const Sentence*>> by_length;
  for (const auto& s : samples) by_length[s.length()].push_back(&s);
  for (int L : ms.lengths) {
    auto group = by_length.find(L);
    if (group == by_length.end() || group->second.empty())
      throw ConfigError("no samples of length " + std::to_string(L));
    auto obs = enumerate_observations(spec, L);
    std::vector<Vector> vals;
    for (const auto& o : obs) {
      Vector acc = Vector::Zero(o.flat_size(d));
      for (const Sentence* s : group->second) acc += eval_phi(o, spec.etas, *s, d);
      vals.push_back(acc / static_cast<double>(group->second.size()));
    }
    ms.ids[L] = std::move(obs);
    ms.values[L] = std::move(vals);
  }
  return ms;
}

}  // namespace lunmix
