#include <doctest.h>

#include "lunmix/evaluation.hpp"
#include "lunmix/hypergraph.hpp"

using namespace lunmix;

namespace {

const std::vector<FamilyKind> kAllFamilies = {
    FamilyKind::pcfg,   FamilyKind::pcfg_i, FamilyKind::pcfg_ie,
    FamilyKind::dep_i,  FamilyKind::dep_ie, FamilyKind::dep_ies,
    FamilyKind::hmm,    FamilyKind::lcm};

ModelFamily small_family(FamilyKind kind, int k, int d) {
  ModelFamily fam{kind, k, d};
  if (fam.is_dependency()) fam.k = 0;
  return fam;
}

// Central finite differences of the exact moment map in free coordinates.
Matrix fd_jacobian(const ModelParams& params, const ObservationSpec& spec,
                   const std::vector<int>& lengths, double h) {
  Vector theta = vectorize_params(params);
  int n = static_cast<int>(theta.size());
  Matrix J;
  for (int i = 0; i < n; ++i) {
    Vector tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    ModelParams pp = unvectorize_params(params.family, tp);
    ModelParams pm = unvectorize_params(params.family, tm);
    Vector stacked_p, stacked_m;
    std::vector<Vector> cols_p, cols_m;
    int rows = 0;
    for (int L : lengths) {
      MomentSet mp = exact_moments(pp, spec, L);
      MomentSet mm = exact_moments(pm, spec, L);
      cols_p.push_back(mp.stacked());
      cols_m.push_back(mm.stacked());
      rows += cols_p.back().size();
    }
    if (J.size() == 0) J.resize(rows, n);
    int at = 0;
    for (size_t b = 0; b < cols_p.size(); ++b) {
      J.block(at, i, cols_p[b].size(), 1) = (cols_p[b] - cols_m[b]) / (2 * h);
      at += cols_p[b].size();
    }
  }
  return J;
}

}  // namespace

TEST_SUITE_BEGIN("hypergraph");

TEST_CASE("degenerate pcfg has a single unit hyperpath") {
  ModelFamily fam{FamilyKind::pcfg, 1, 1};
  Rng rng(1);
  ModelParams p = random_params(fam, rng);
  Hypergraph h = build_hypergraph(fam, 2);
  CHECK(inside_value(h, raw_vector(p), {}) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("hyperpath counts match enumeration") {
  // unit parameters turn inside into a path counter (times the 1/|Trees| mass)
  ModelFamily fam{FamilyKind::pcfg, 1, 2};
  Hypergraph h = build_hypergraph(fam, 3);
  Vector ones = Vector::Ones(raw_dim(fam));
  double total = inside_value(h, ones, {});
  CHECK(total * topology_count(TopologyKind::constituency, 3) ==
        doctest::Approx(16.0).epsilon(1e-12));

  ModelFamily dep{FamilyKind::dep_ie, 0, 2};
  Hypergraph hd = build_hypergraph(dep, 3);
  Vector ones_d = Vector::Ones(raw_dim(dep));
  CHECK(inside_value(hd, ones_d, {}) * topology_count(TopologyKind::dependency, 3) ==
        doctest::Approx(7.0 * 8.0).epsilon(1e-12));
}

TEST_CASE("total probability is one for every family") {
  Rng rng(2);
  for (auto kind : kAllFamilies) {
    ModelFamily fam = small_family(kind, 2, 2);
    ModelParams p = random_params(fam, rng);
    Vector raw = raw_vector(p);
    for (int L = 1; L <= 4; ++L) {
      Hypergraph h = build_hypergraph(fam, L);
      CHECK(inside_value(h, raw, {}) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("inside with an indicator factor equals a marginal") {
  Rng rng(3);
  ModelFamily fam{FamilyKind::pcfg, 2, 2};
  ModelParams p = random_params(fam, rng);
  Hypergraph h = build_hypergraph(fam, 3);
  CoordFactor f;
  f.constraints.push_back({1, 0, nullptr});  // x_1 == word 1
  double by_dp = inside_value(h, raw_vector(p), f);
  double by_enum = 0.0;
  for (const auto& x : all_sentences(2, 3))
    if (x.words[0] == 1) by_enum += marginal_prob(p, x);
  CHECK(by_dp == doctest::Approx(by_enum).epsilon(1e-12));
}

TEST_CASE("outside scores satisfy the emission-cut identity") {
  Rng rng(4);
  for (auto kind : {FamilyKind::pcfg_ie, FamilyKind::dep_ie, FamilyKind::hmm}) {
    ModelFamily fam = small_family(kind, 2, 2);
    ModelParams p = random_params(fam, rng);
    Vector raw = raw_vector(p);
    Hypergraph h = build_hypergraph(fam, 3);
    CoordFactor f;
    InsideOutside io = inside_outside(h, raw, f, true);
    // every hyperpath crosses exactly one emitting edge per position
    for (int pos = 1; pos <= 3; ++pos) {
      double cut = 0.0;
      for (const auto& e : h.edges) {
        if (e.pos != pos) continue;
        double w = e.constant;
        if (e.param >= 0) w *= raw(e.param);
        cut += w * io.beta(e.a) * io.alpha(e.b) * io.alpha(e.c);
      }
      CHECK(cut == doctest::Approx(io.value).epsilon(1e-12));
    }
    CHECK(io.beta(h.start()) == 1.0);
  }
}

TEST_CASE("exact moments agree with brute force on every family") {
  Rng rng(5);
  auto spec_pairs = ObservationSpec::make(ObsFamily::all_pairs);
  auto spec_thin =
      ObservationSpec::make(ObsFamily::all_thin_triples, {eta_ones(2), eta_e1(2)});
  auto spec_triples = ObservationSpec::make(ObsFamily::triples);
  for (auto kind : kAllFamilies) {
    ModelFamily fam = small_family(kind, 2, 2);
    ModelParams p = random_params(fam, rng);
    for (int L = 2; L <= 4; ++L) {
      for (const auto& spec : {spec_pairs, spec_thin, spec_triples}) {
        MomentSet dp = exact_moments(p, spec, L);
        MomentSet bf = brute_force_moments(p, spec, L);
        REQUIRE(dp.values[L].size() == bf.values[L].size());
        for (size_t i = 0; i < dp.values[L].size(); ++i)
          CHECK((dp.values[L][i] - bf.values[L][i]).lpNorm<Eigen::Infinity>() < 1e-10);
      }
    }
  }
  // one larger-dimension spot check
  ModelFamily fam3 = small_family(FamilyKind::pcfg_i, 3, 3);
  ModelParams p3 = random_params(fam3, rng);
  MomentSet dp = exact_moments(p3, spec_pairs, 4);
  MomentSet bf = brute_force_moments(p3, spec_pairs, 4);
  for (size_t i = 0; i < dp.values[4].size(); ++i)
    CHECK((dp.values[4][i] - bf.values[4][i]).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("dep-ies closed-form moments") {
  Rng rng(6);
  ModelFamily fam{FamilyKind::dep_ies, 0, 3};
  ModelParams p = random_params(fam, rng);
  Matrix A = p.A;
  Matrix D = Matrix(p.pi.asDiagonal());
  Matrix At = A.transpose();

  auto spec = ObservationSpec::make(ObsFamily::all_pairs);
  MomentSet m3 = exact_moments(p, spec, 3);
  Matrix mu12 = m3.as_matrix(3, 0);
  Matrix mu13 = m3.as_matrix(3, 1);
  Matrix want12 =
      (D * At + D * At + D * At * At + A * D + A * D * At + A * D + D * At) / 7.0;
  Matrix want13 =
      (D * At + D * At * At + D * At + A * D * At + A * D + A * A * D + A * D) / 7.0;
  CHECK((mu12 - want12).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((mu13 - want13).lpNorm<Eigen::Infinity>() < 1e-12);

  MomentSet m2 = exact_moments(p, spec, 2);
  Matrix mu12t = m2.as_matrix(2, 0);
  Matrix want12t = (D * At + A * D) / 2.0;
  CHECK((mu12t - want12t).lpNorm<Eigen::Infinity>() < 1e-12);

  MomentSet m1 = exact_moments(p, ObservationSpec::make(ObsFamily::first_moment), 3);
  CHECK((m1.flat(3, 0) - p.pi).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("hmm pair moments in closed form") {
  Rng rng(7);
  ModelFamily fam{FamilyKind::hmm, 2, 3};
  ModelParams p = random_params(fam, rng);
  Matrix D = Matrix(p.pi.asDiagonal());
  auto spec = ObservationSpec::make(ObsFamily::all_pairs);
  MomentSet m = exact_moments(p, spec, 4);
  // ids: 12, 13, 14, 23, 24, 34
  Matrix mu12 = m.as_matrix(4, 0);
  Matrix mu23 = m.as_matrix(4, 3);
  Matrix mu34 = m.as_matrix(4, 5);
  Matrix want12 = p.O * D * p.T.transpose() * p.O.transpose();
  Matrix want23 =
      p.O * Matrix((p.T * p.pi).asDiagonal()) * p.T.transpose() * p.O.transpose();
  Matrix want34 = p.O * Matrix((p.T * p.T * p.pi).asDiagonal()) * p.T.transpose() *
                  p.O.transpose();
  CHECK((mu12 - want12).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((mu23 - want23).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((mu34 - want34).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("jacobian matches central finite differences") {
  Rng rng(8);
  struct Case {
    ModelFamily fam;
    ObservationSpec spec;
    std::vector<int> lengths;
  };
  std::vector<Case> cases = {
      {small_family(FamilyKind::pcfg_ie, 2, 2),
       ObservationSpec::make(ObsFamily::all_pairs), {3}},
      {small_family(FamilyKind::pcfg, 2, 2),
       ObservationSpec::make(ObsFamily::all_pairs), {3}},
      {small_family(FamilyKind::dep_ie, 0, 2),
       ObservationSpec::make(ObsFamily::all_pairs), {2, 3}},
      {small_family(FamilyKind::dep_ies, 0, 3),
       ObservationSpec::make(ObsFamily::all_pairs), {2, 3}},
      {small_family(FamilyKind::hmm, 2, 2),
       ObservationSpec::make(ObsFamily::all_thin_triples, {eta_e1(2)}), {3}},
      {small_family(FamilyKind::lcm, 2, 2),
       ObservationSpec::make(ObsFamily::triples), {3}},
  };
  for (const auto& c : cases) {
    ModelParams p = random_params(c.fam, rng);
    Matrix J = jacobian(p, c.spec, c.lengths);
    Matrix F = fd_jacobian(p, c.spec, c.lengths, 1e-5);
    REQUIRE(J.rows() == F.rows());
    double scale = std::max(1.0, F.lpNorm<Eigen::Infinity>());
    CHECK((J - F).lpNorm<Eigen::Infinity>() / scale < 1e-6);
  }
}

TEST_CASE("jacobian columns for untouched parameters vanish") {
  Rng rng(9);
  ModelFamily fam{FamilyKind::hmm, 2, 2};
  ModelParams p = random_params(fam, rng);
  // with L = 1 no transition edge exists, so dT entries are zero
  Matrix J = jacobian(p, ObservationSpec::make(ObsFamily::first_moment), {1});
  // free layout: pi (1), T (2), O (2)
  CHECK(J.col(1).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(J.col(2).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(J.col(0).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("jacobian is deterministic") {
  Rng rng(10);
  ModelFamily fam{FamilyKind::pcfg_ie, 2, 2};
  ModelParams p = random_params(fam, rng);
  auto spec = ObservationSpec::make(ObsFamily::all_pairs);
  Matrix a = jacobian(p, spec, {3});
  Matrix b = jacobian(p, spec, {3});
  CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("raw gradients satisfy Euler homogeneity at k=1") {
  // L=2 PCFG-IE with k=1: each hyperpath multiplies 5 parameters
  // (pi, two T edges, two emissions), so theta . grad = 5 mu.
  ModelFamily fam{FamilyKind::pcfg_ie, 1, 2};
  Rng rng(11);
  ModelParams p = random_params(fam, rng);
  Vector raw = raw_vector(p);
  Hypergraph h = build_hypergraph(fam, 2);
  auto spec = ObservationSpec::make(ObsFamily::pairs);
  auto obs = enumerate_observations(spec, 2);
  for (int idx = 0; idx < 4; ++idx) {
    CoordFactor f = coord_factor(obs[0], idx, 2, {});
    InsideOutside io = inside_outside(h, raw, f, true);
    Vector g = Vector::Zero(raw.size());
    for (const auto& e : h.edges) {
      if (e.param < 0) continue;
      double fac = e.pos > 0 ? f(e.pos, e.word) : 1.0;
      g(e.param) += e.constant * fac * io.beta(e.a) * io.alpha(e.b) * io.alpha(e.c);
    }
    CHECK(raw.dot(g) == doctest::Approx(5.0 * io.value).epsilon(1e-12));
  }
}

TEST_CASE("thin triple with ones projection equals the pair moment") {
  Rng rng(12);
  ModelFamily fam{FamilyKind::pcfg_ie, 2, 2};
  ModelParams p = random_params(fam, rng);
  auto thin = ObservationSpec::make(ObsFamily::thin_triples, {eta_ones(2)});
  auto pairs = ObservationSpec::make(ObsFamily::pairs);
  MomentSet mt = exact_moments(p, thin, 3);
  MomentSet mp = exact_moments(p, pairs, 3);
  CHECK((mt.flat(3, 0) - mp.flat(3, 0)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("full triple contracts to the thin triple") {
  Rng rng(13);
  ModelFamily fam{FamilyKind::hmm, 2, 2};
  ModelParams p = random_params(fam, rng);
  int d = 2;
  Eta tau = eta_tau(d, 99);
  MomentSet full = exact_moments(p, ObservationSpec::make(ObsFamily::triples), 3);
  MomentSet thin =
      exact_moments(p, ObservationSpec::make(ObsFamily::thin_triples, {tau}), 3);
  const Vector& t = full.flat(3, 0);
  Vector contracted = Vector::Zero(d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        contracted(a * d + b) += t((a * d + b) * d + c) * tau.v(c);
  CHECK((contracted - thin.flat(3, 0)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("single-hyperpath graphs factor as alpha * beta everywhere") {
  // L = 2 with k = d = 1: a single topology and a single (x, z) hyperpath
  ModelFamily fam{FamilyKind::pcfg, 1, 1};
  Rng rng(30);
  ModelParams p = random_params(fam, rng);
  Hypergraph h = build_hypergraph(fam, 2);
  InsideOutside io = inside_outside(h, raw_vector(p), {}, true);
  for (int v = 1; v < h.num_nodes; ++v)
    CHECK(io.alpha(v) * io.beta(v) == doctest::Approx(io.value).epsilon(1e-12));
}

TEST_CASE("stacked jacobians are row-stacks of per-observation jacobians") {
  Rng rng(31);
  ModelFamily fam{FamilyKind::hmm, 2, 2};
  ModelParams p = random_params(fam, rng);
  Matrix all = jacobian(p, ObservationSpec::make(ObsFamily::all_pairs), {3});
  Matrix single = jacobian(p, ObservationSpec::make(ObsFamily::pairs), {3});
  // AllPairs rows start with the (1,2) block
  CHECK((all.topRows(single.rows()) - single).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("hypergraph dump lists nodes and edges") {
  ModelFamily fam{FamilyKind::pcfg_ie, 1, 1};
  Hypergraph h = build_hypergraph(fam, 2);
  std::string dump = h.dump();
  CHECK(dump.find("START") != std::string::npos);
  CHECK(dump.find("END") != std::string::npos);
}

TEST_SUITE_END();
