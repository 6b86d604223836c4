#include "lunmix/hypergraph.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

namespace lunmix {

namespace {

struct Builder {
  Hypergraph h;
  std::vector<Hyperedge> staged;

  explicit Builder(const ModelFamily& fam, int L) {
    h.family = fam;
    h.L = L;
    h.num_nodes = 1;
    h.node_names.push_back("END");
  }

  int node(const std::string& name) {
    h.node_names.push_back(name);
    return h.num_nodes++;
  }

  void edge(int a, int b, int c, int param, double constant = 1.0, int pos = 0,
            int word = -1) {
    staged.push_back({a, b, c, param, constant, static_cast<int16_t>(pos), word});
  }

  Hypergraph finish() {
    // group edges by source; sources already get ascending ids by build order
    std::stable_sort(staged.begin(), staged.end(),
                     [](const Hyperedge& x, const Hyperedge& y) { return x.a < y.a; });
    h.edge_begin.assign(h.num_nodes + 1, 0);
    for (const auto& e : staged) ++h.edge_begin[e.a + 1];
    for (int v = 0; v < h.num_nodes; ++v) h.edge_begin[v + 1] += h.edge_begin[v];
    h.edges = std::move(staged);
    return std::move(h);
  }
};

int block_offset(const ModelFamily& fam, const std::string& name) {
  for (const auto& b : param_blocks(fam))
    if (b.name == name) return b.raw_offset;
  throw UnsupportedError("parameter block not present: " + name);
}

Hypergraph build_constituency(const ModelFamily& fam, int L) {
  Builder bld(fam, L);
  int k = fam.k, d = fam.d;
  int off_pi = block_offset(fam, "pi");
  int off_O = block_offset(fam, "O");
  double mass = 1.0 / static_cast<double>(topology_count(TopologyKind::constituency, L));

  // span nodes, indexed [i][j][s]
  std::map<std::tuple<int, int, int>, int> span;
  auto span_name = [](int i, int j, int s) {
    std::ostringstream os;
    os << "(" << i << "," << j << ";s" << s << ")";
    return os.str();
  };

  for (int i = 1; i <= L; ++i)
    for (int s = 0; s < k; ++s) {
      int v = bld.node(span_name(i - 1, i, s));
      span[{i - 1, i, s}] = v;
      for (int x = 0; x < d; ++x)
        bld.edge(v, Hypergraph::kEnd, Hypergraph::kEnd, off_O + s * d + x, 1.0, i, x);
    }

  const bool factored = fam.kind != FamilyKind::pcfg;
  int off_left = 0, off_right = 0, off_B = 0;
  if (fam.kind == FamilyKind::pcfg) {
    off_B = block_offset(fam, "B");
  } else if (fam.kind == FamilyKind::pcfg_i) {
    off_left = block_offset(fam, "T1");
    off_right = block_offset(fam, "T2");
  } else {
    off_left = off_right = block_offset(fam, "T");
  }

  for (int w = 2; w <= L; ++w)
    for (int i = 0; i + w <= L; ++i) {
      int j = i + w;
      if (factored) {
        // two-stage expansion: pick the left child state, then the right
        std::map<std::tuple<int, int, int>, int> mid;  // (m, s1, s2) -> node
        for (int m = i + 1; m < j; ++m)
          for (int s1 = 0; s1 < k; ++s1)
            for (int s2 = 0; s2 < k; ++s2) {
              std::ostringstream os;
              os << "(" << i << "," << m << "," << j << ";s" << s1 << ",l" << s2 << ")";
              int v = bld.node(os.str());
              mid[{m, s1, s2}] = v;
              for (int s3 = 0; s3 < k; ++s3)
                bld.edge(v, span[{i, m, s2}], span[{m, j, s3}],
                         off_right + s1 * k + s3);
            }
        for (int s1 = 0; s1 < k; ++s1) {
          int v = bld.node(span_name(i, j, s1));
          span[{i, j, s1}] = v;
          for (int m = i + 1; m < j; ++m)
            for (int s2 = 0; s2 < k; ++s2)
              bld.edge(v, mid[{m, s1, s2}], Hypergraph::kEnd, off_left + s1 * k + s2);
        }
      } else {
        for (int s1 = 0; s1 < k; ++s1) {
          int v = bld.node(span_name(i, j, s1));
          span[{i, j, s1}] = v;
          for (int m = i + 1; m < j; ++m)
            for (int s2 = 0; s2 < k; ++s2)
              for (int s3 = 0; s3 < k; ++s3)
                bld.edge(v, span[{i, m, s2}], span[{m, j, s3}],
                         off_B + s1 * k * k + (s2 * k + s3));
        }
      }
    }

  int start = bld.node("START");
  for (int s = 0; s < k; ++s)
    bld.edge(start, span[{0, L, s}], Hypergraph::kEnd, off_pi + s, mass);
  return bld.finish();
}

Hypergraph build_chain(const ModelFamily& fam, int L) {
  Builder bld(fam, L);
  int k = fam.k, d = fam.d;
  int off_pi = block_offset(fam, "pi");
  int off_O = block_offset(fam, "O");
  const bool hmm = fam.kind == FamilyKind::hmm;
  int off_T = hmm ? block_offset(fam, "T") : 0;

  // pre[i][s]: suffix from position i, state s, word i not yet emitted;
  // post[i][s]: word i emitted (HMM only; the LCM keeps its single state).
  std::vector<std::vector<int>> pre(L + 1, std::vector<int>(k, 0));
  std::vector<std::vector<int>> post(L + 1, std::vector<int>(k, 0));

  for (int i = L; i >= 1; --i) {
    if (i < L) {
      if (hmm) {
        for (int s = 0; s < k; ++s) {
          int v = bld.node("post(" + std::to_string(i) + ",s" + std::to_string(s) + ")");
          post[i][s] = v;
          for (int s2 = 0; s2 < k; ++s2)
            bld.edge(v, pre[i + 1][s2], Hypergraph::kEnd, off_T + s * k + s2);
        }
      }
    }
    for (int s = 0; s < k; ++s) {
      int v = bld.node("pre(" + std::to_string(i) + ",s" + std::to_string(s) + ")");
      pre[i][s] = v;
      int next = (i == L) ? Hypergraph::kEnd : (hmm ? post[i][s] : pre[i + 1][s]);
      for (int x = 0; x < d; ++x)
        bld.edge(v, next, Hypergraph::kEnd, off_O + s * d + x, 1.0, i, x);
    }
  }

  int start = bld.node("START");
  for (int s = 0; s < k; ++s)
    bld.edge(start, pre[1][s], Hypergraph::kEnd, off_pi + s);
  return bld.finish();
}

// Split-head (Eisner-style) items decorated with boundary head words, so
// every hyperpath fixes a projective tree plus a full word assignment.
Hypergraph build_dependency(const ModelFamily& fam, int L) {
  Builder bld(fam, L);
  int d = fam.d;
  int off_pi = block_offset(fam, "pi");
  int off_L =
      block_offset(fam, fam.kind == FamilyKind::dep_i ? "A_left" : "A");
  int off_R =
      block_offset(fam, fam.kind == FamilyKind::dep_i ? "A_right" : "A");
  double mass = 1.0 / static_cast<double>(topology_count(TopologyKind::dependency, L));

  // item keys: kind 0 = Cr[i,j](u), 1 = Cl[i,j](u), 2 = Ir[i,j](u,v),
  // 3 = Il[i,j](u,v)
  std::map<std::tuple<int, int, int, int, int>, int> item;
  auto name = [](int kind, int i, int j, int u, int v) {
    static const char* kn[] = {"Cr", "Cl", "Ir", "Il"};
    std::ostringstream os;
    os << kn[kind] << "[" << i << "," << j << "](" << u;
    if (kind >= 2) os << "," << v;
    os << ")";
    return os.str();
  };

  for (int i = 1; i <= L; ++i)
    for (int u = 0; u < d; ++u) {
      int vr = bld.node(name(0, i, i, u, -1));
      item[{0, i, i, u, -1}] = vr;
      bld.edge(vr, Hypergraph::kEnd, Hypergraph::kEnd, -1);
      int vl = bld.node(name(1, i, i, u, -1));
      item[{1, i, i, u, -1}] = vl;
      // the left half-axiom carries the position's moment factor
      bld.edge(vl, Hypergraph::kEnd, Hypergraph::kEnd, -1, 1.0, i, u);
    }

  for (int w = 1; w < L; ++w)
    for (int i = 1; i + w <= L; ++i) {
      int j = i + w;
      for (int u = 0; u < d; ++u)
        for (int v = 0; v < d; ++v) {
          int ir = bld.node(name(2, i, j, u, v));
          item[{2, i, j, u, v}] = ir;
          int il = bld.node(name(3, i, j, u, v));
          item[{3, i, j, u, v}] = il;
          for (int m = i; m < j; ++m) {
            int left = item[{0, i, m, u, -1}];
            int right = item[{1, m + 1, j, v, -1}];
            // arc i -> j: head word u generates right argument v
            bld.edge(ir, left, right, off_R + u * d + v);
            // arc j -> i: head word v generates left argument u
            bld.edge(il, left, right, off_L + v * d + u);
          }
        }
      for (int u = 0; u < d; ++u) {
        int cr = bld.node(name(0, i, j, u, -1));
        item[{0, i, j, u, -1}] = cr;
        for (int m = i + 1; m <= j; ++m)
          for (int v = 0; v < d; ++v)
            bld.edge(cr, item[{2, i, m, u, v}], item[{0, m, j, v, -1}], -1);
        int cl = bld.node(name(1, i, j, u, -1));
        item[{1, i, j, u, -1}] = cl;
        for (int m = i; m < j; ++m)
          for (int v = 0; v < d; ++v)
            bld.edge(cl, item[{1, i, m, v, -1}], item[{3, m, j, v, u}], -1);
      }
    }

  int start = bld.node("START");
  for (int r = 1; r <= L; ++r)
    for (int w = 0; w < d; ++w)
      bld.edge(start, item[{1, 1, r, w, -1}], item[{0, r, L, w, -1}], off_pi + w,
               mass);
  return bld.finish();
}

}  // namespace

std::string Hypergraph::dump() const {
  std::ostringstream os;
  os << "hypergraph " << family_name(family.kind) << " L=" << L << " nodes="
     << num_nodes << " edges=" << edges.size() << "\n";
  for (int v = num_nodes - 1; v >= 0; --v) {
    if (edge_begin[v] == edge_begin[v + 1]) continue;
    os << node_names[v] << ":\n";
    for (int e = edge_begin[v]; e < edge_begin[v + 1]; ++e) {
      const auto& ed = edges[e];
      os << "  -> " << node_names[ed.b] << " , " << node_names[ed.c]
         << "  param=" << ed.param << " const=" << ed.constant;
      if (ed.pos > 0) os << " pos=" << ed.pos << " word=" << ed.word;
      os << "\n";
    }
  }
  return os.str();
}

Hypergraph build_hypergraph(const ModelFamily& family, int L) {
  family.validate();
  if (L < 1) throw ConfigError("L >= 1 required");
  if (family.is_constituency()) return build_constituency(family, L);
  if (family.is_dependency()) return build_dependency(family, L);
  return build_chain(family, L);
}

CoordFactor coord_factor(const ObsId& o, int flat_index, int d,
                         const std::vector<Eta>& etas) {
  CoordFactor f;
  switch (o.kind) {
    case ObsId::Kind::first:
      f.constraints.push_back({o.pos[0], flat_index, nullptr});
      break;
    case ObsId::Kind::pair:
      f.constraints.push_back({o.pos[0], flat_index / d, nullptr});
      f.constraints.push_back({o.pos[1], flat_index % d, nullptr});
      break;
    case ObsId::Kind::thin_triple:
      f.constraints.push_back({o.pos[0], flat_index / d, nullptr});
      f.constraints.push_back({o.pos[1], flat_index % d, nullptr});
      f.constraints.push_back({o.pos[2], -1, &etas.at(o.eta).v});
      break;
    case ObsId::Kind::triple:
      f.constraints.push_back({o.pos[0], flat_index / (d * d), nullptr});
      f.constraints.push_back({o.pos[1], (flat_index / d) % d, nullptr});
      f.constraints.push_back({o.pos[2], flat_index % d, nullptr});
      break;
  }
  return f;
}

InsideOutside inside_outside(const Hypergraph& h, const Vector& raw,
                             const CoordFactor& f, bool with_outside) {
  InsideOutside io;
  io.alpha = Vector::Zero(h.num_nodes);
  io.alpha(Hypergraph::kEnd) = 1.0;
  auto weight = [&](const Hyperedge& e) {
    double w = e.constant;
    if (e.param >= 0) w *= raw(e.param);
    if (e.pos > 0) w *= f(e.pos, e.word);
    return w;
  };
  for (int v = 1; v < h.num_nodes; ++v) {
    double a = 0.0;
    for (int ei = h.edge_begin[v]; ei < h.edge_begin[v + 1]; ++ei) {
      const auto& e = h.edges[ei];
      a += weight(e) * io.alpha(e.b) * io.alpha(e.c);
    }
    io.alpha(v) = a;
  }
  io.value = io.alpha(h.start());
  if (with_outside) {
    io.beta = Vector::Zero(h.num_nodes);
    io.beta(h.start()) = 1.0;
    for (int v = h.num_nodes - 1; v >= 1; --v) {
      double bv = io.beta(v);
      if (bv == 0.0) continue;
      for (int ei = h.edge_begin[v]; ei < h.edge_begin[v + 1]; ++ei) {
        const auto& e = h.edges[ei];
        double w = weight(e);
        if (e.b != Hypergraph::kEnd) io.beta(e.b) += w * io.alpha(e.c) * bv;
        if (e.c != Hypergraph::kEnd) io.beta(e.c) += w * io.alpha(e.b) * bv;
      }
    }
  }
  return io;
}

double inside_value(const Hypergraph& h, const Vector& raw, const CoordFactor& f) {
  return inside_outside(h, raw, f, false).value;
}

MomentSet exact_moments(const ModelParams& params, const ObservationSpec& spec,
                        int L) {
  params.validate();
  Hypergraph h = build_hypergraph(params.family, L);
  Vector raw = raw_vector(params);
  int d = params.family.d;
  MomentSet ms;
  ms.spec = spec;
  ms.d = d;
  ms.lengths = {L};
  auto obs = enumerate_observations(spec, L);
  std::vector<Vector> vals;
  for (const auto& o : obs) {
    Vector v(o.flat_size(d));
    for (int idx = 0; idx < v.size(); ++idx)
      v(idx) = inside_value(h, raw, coord_factor(o, idx, d, spec.etas));
    vals.push_back(std::move(v));
  }
  ms.ids[L] = std::move(obs);
  ms.values[L] = std::move(vals);
  return ms;
}

MomentSet exact_moments_range(const ModelParams& params, const ObservationSpec& spec,
                              const std::vector<int>& lengths) {
  MomentSet out;
  out.spec = spec;
  out.d = params.family.d;
  out.lengths = lengths;
  std::sort(out.lengths.begin(), out.lengths.end());
  for (int L : out.lengths) {
    MomentSet one = exact_moments(params, spec, L);
    out.ids[L] = std::move(one.ids[L]);
    out.values[L] = std::move(one.values[L]);
  }
  return out;
}

namespace {

// dpi/dA for DEP-IES free coordinates, via implicit differentiation of
// (A - I) pi = 0, sum(pi) = 1.
Matrix stationarity_sensitivity(const ModelParams& params) {
  int d = params.family.d;
  Matrix M(d + 1, d);
  M.topRows(d) = params.A - Matrix::Identity(d, d);
  M.bottomRows(1).setOnes();
  Eigen::ColPivHouseholderQR<Matrix> qr(M);
  Matrix dpi(d, d * (d - 1));
  int f = 0;
  for (int c = 0; c < d; ++c)
    for (int r = 0; r + 1 < d; ++r, ++f) {
      Vector rhs = Vector::Zero(d + 1);
      // dA = E_{r,c} - E_{d-1,c}; rhs = [-dA pi; 0]
      rhs(r) -= params.pi(c);
      rhs(d - 1) += params.pi(c);
      dpi.col(f) = qr.solve(rhs);
    }
  return dpi;
}

}  // namespace

Matrix jacobian(const ModelParams& params, const ObservationSpec& spec,
                const std::vector<int>& lengths_in) {
  params.validate();
  const ModelFamily& fam = params.family;
  Vector raw = raw_vector(params);
  int d = fam.d;
  int n = free_dim(fam);
  auto blocks = param_blocks(fam);

  // rows follow the MomentSet layout: lengths ascending, then observations
  std::vector<int> lengths = lengths_in;
  std::sort(lengths.begin(), lengths.end());

  int rows = 0;
  for (int L : lengths)
    for (const auto& o : enumerate_observations(spec, L)) rows += o.flat_size(d);
  Matrix J(rows, n);

  const bool ies = fam.kind == FamilyKind::dep_ies;
  Matrix dpi;
  int pi_offset = 0;
  if (ies) {
    dpi = stationarity_sensitivity(params);
    pi_offset = block_offset(fam, "pi");
  }

  int row = 0;
  for (int L : lengths) {
    Hypergraph h = build_hypergraph(fam, L);
    for (const auto& o : enumerate_observations(spec, L)) {
      for (int idx = 0; idx < o.flat_size(d); ++idx, ++row) {
        CoordFactor f = coord_factor(o, idx, d, spec.etas);
        InsideOutside io = inside_outside(h, raw, f, true);
        Vector g = Vector::Zero(raw.size());
        for (const auto& e : h.edges) {
          if (e.param < 0) continue;
          double fac = e.pos > 0 ? f(e.pos, e.word) : 1.0;
          if (fac == 0.0) continue;
          g(e.param) += e.constant * fac * io.beta(e.a) * io.alpha(e.b) * io.alpha(e.c);
        }
        int t = 0;
        for (const auto& b : blocks) {
          if (!b.free) continue;
          for (int c = 0; c < b.cols; ++c) {
            double last = g(b.raw_offset + c * b.rows + b.rows - 1);
            for (int r = 0; r + 1 < b.rows; ++r, ++t)
              J(row, t) = g(b.raw_offset + c * b.rows + r) - last;
          }
        }
        if (ies) {
          // add the induced d(pi)/d(A) term
          Vector gpi = g.segment(pi_offset, d);
          J.row(row) += (gpi.transpose() * dpi);
        }
      }
    }
  }
  return J;
}

}  // namespace lunmix
