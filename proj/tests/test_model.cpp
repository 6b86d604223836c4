#include <doctest.h>

#include <algorithm>
#include <set>

#include "lunmix/evaluation.hpp"
#include "lunmix/model.hpp"

using namespace lunmix;

namespace {

long catalan(int n) {
  long c = 1;
  for (int i = 0; i < n; ++i) c = c * 2 * (2 * i + 1) / (i + 2);
  return c;
}

std::set<std::pair<int, int>> edge_set(const Topology& t) {
  return {t.edges.begin(), t.edges.end()};
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("topology enumeration counts") {
  CHECK(enumerate_topologies(TopologyKind::constituency, 3).size() == 2);
  CHECK(enumerate_topologies(TopologyKind::dependency, 3).size() == 7);
  CHECK(enumerate_topologies(TopologyKind::constituency, 2).size() == 1);
  CHECK(enumerate_topologies(TopologyKind::constituency, 4).size() == 5);
  for (int L = 1; L <= 8; ++L) {
    CHECK(static_cast<long>(enumerate_topologies(TopologyKind::constituency, L).size()) ==
          catalan(L - 1));
    CHECK(topology_count(TopologyKind::constituency, L) == catalan(L - 1));
  }
  for (int L = 1; L <= 6; ++L)
    CHECK(static_cast<long>(enumerate_topologies(TopologyKind::dependency, L).size()) ==
          topology_count(TopologyKind::dependency, L));
  CHECK_THROWS_AS(enumerate_topologies(TopologyKind::constituency, 13),
                  EnumerationError);
  CHECK_THROWS_AS(enumerate_topologies(TopologyKind::dependency, 9), EnumerationError);
}

TEST_CASE("topologies are duplicate-free") {
  auto topos = enumerate_topologies(TopologyKind::dependency, 5);
  std::set<std::pair<int, std::set<std::pair<int, int>>>> seen;
  for (const auto& t : topos) seen.insert({t.root, edge_set(t)});
  CHECK(seen.size() == topos.size());

  auto brks = enumerate_topologies(TopologyKind::constituency, 6);
  std::set<std::vector<std::array<int, 3>>> sseen;
  for (const auto& t : brks) sseen.insert(t.splits);
  CHECK(sseen.size() == brks.size());
}

// Independent oracle for the dependency enumeration: all parent functions on
// [L], filtered to trees satisfying the contiguous-yield predicate.
TEST_CASE("dependency enumeration matches arborescence filter at L=4") {
  const int L = 4;
  std::set<std::pair<int, std::set<std::pair<int, int>>>> filtered;
  for (int root = 1; root <= L; ++root) {
    std::vector<int> others;
    for (int i = 1; i <= L; ++i)
      if (i != root) others.push_back(i);
    int combos = 1;
    for (size_t i = 0; i < others.size(); ++i) combos *= L;
    for (int code = 0; code < combos; ++code) {
      int c = code;
      std::vector<std::pair<int, int>> edges;
      for (int child : others) {
        edges.push_back({c % L + 1, child});
        c /= L;
      }
      if (is_projective(edges, root, L))
        filtered.insert({root, {edges.begin(), edges.end()}});
    }
  }
  CHECK(filtered.size() == 30);
  auto topos = enumerate_topologies(TopologyKind::dependency, L);
  CHECK(topos.size() == 30);
  for (const auto& t : topos) CHECK(filtered.count({t.root, edge_set(t)}) == 1);
}

TEST_CASE("projectivity predicate") {
  // crossing arcs: 1->3 and 2->4 under root 1
  CHECK_FALSE(is_projective({{1, 2}, {1, 3}, {2, 4}}, 1, 4));
  CHECK(is_projective({{1, 4}, {4, 2}, {2, 3}}, 1, 4));
  CHECK(is_projective({{3, 1}, {1, 2}}, 3, 3));
  CHECK_FALSE(is_projective({{2, 1}, {1, 3}}, 2, 3));  // yield of 1 = {1,3}
}

TEST_CASE("joint probabilities normalize") {
  Rng rng(7);
  for (auto kind : {FamilyKind::pcfg, FamilyKind::pcfg_i, FamilyKind::pcfg_ie,
                    FamilyKind::dep_i, FamilyKind::dep_ie, FamilyKind::dep_ies,
                    FamilyKind::hmm, FamilyKind::lcm}) {
    ModelFamily fam{kind, 2, 2};
    if (fam.is_dependency()) fam.k = 0;
    ModelParams p = random_params(fam, rng);
    for (int L : {1, 2, 3, 4}) {
      double total = 0.0;
      for (const auto& x : all_sentences(fam.d, L)) total += marginal_prob(p, x);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("joint_prob rejects mismatched inputs") {
  Rng rng(71);
  ModelParams p = random_params(ModelFamily{FamilyKind::pcfg_ie, 2, 2}, rng);
  auto trees = enumerate_parse_trees(p.family, 2);
  Sentence wrong_len{{1, 2, 1}};
  CHECK_THROWS_AS(joint_prob(p, wrong_len, trees[0]), DimensionError);
  Sentence bad_word{{1, 3}};
  CHECK_THROWS_AS(joint_prob(p, bad_word, trees[0]), DimensionError);
}

TEST_CASE("dep-i single word") {
  Rng rng(3);
  ModelFamily fam{FamilyKind::dep_i, 0, 3};
  ModelParams p = random_params(fam, rng);
  for (int w = 1; w <= 3; ++w) {
    Sentence x{{w}};
    CHECK(marginal_prob(p, x) == doctest::Approx(p.pi(w - 1)).epsilon(1e-14));
  }
}

TEST_CASE("pcfg-ie identity propagation") {
  // T = I, O = I: all nodes share the root state, words are deterministic.
  int k = 3;
  ModelFamily fam{FamilyKind::pcfg_ie, k, k};
  ModelParams p;
  p.family = fam;
  p.pi = Vector::Constant(k, 1.0 / k);
  p.T = Matrix::Identity(k, k);
  p.O = Matrix::Identity(k, k);
  for (int w = 1; w <= k; ++w) {
    Sentence x{{w, w, w}};
    CHECK(marginal_prob(p, x) == doctest::Approx(1.0 / k).epsilon(1e-12));
  }
  Sentence mixed{{1, 2, 1}};
  CHECK(marginal_prob(p, mixed) == doctest::Approx(0.0));
}

TEST_CASE("dep-ie L=2 closed form") {
  Rng rng(11);
  ModelFamily fam{FamilyKind::dep_ie, 0, 2};
  ModelParams p = random_params(fam, rng);
  Matrix mu = 0.5 * (p.A * p.pi.asDiagonal() + p.pi.asDiagonal() * p.A.transpose());
  for (int a = 1; a <= 2; ++a)
    for (int b = 1; b <= 2; ++b) {
      Sentence x{{a, b}};
      CHECK(marginal_prob(p, x) == doctest::Approx(mu(a - 1, b - 1)).epsilon(1e-12));
    }
}

TEST_CASE("dep-ies L=1 marginal is pi") {
  Rng rng(5);
  ModelFamily fam{FamilyKind::dep_ies, 0, 3};
  ModelParams p = random_params(fam, rng);
  for (int w = 1; w <= 3; ++w) {
    Sentence x{{w}};
    CHECK(marginal_prob(p, x) == doctest::Approx(p.pi(w - 1)).epsilon(1e-12));
  }
}

TEST_CASE("sampling matches marginals") {
  Rng rng(21);
  ModelFamily fam{FamilyKind::dep_ie, 0, 2};
  ModelParams p = random_params(fam, rng);
  const int N = 1000000;
  std::map<std::pair<int, int>, int> counts;
  Rng sampler(12345);
  for (int i = 0; i < N; ++i) {
    Sentence x = sample_sentence(p, 2, sampler);
    counts[{x.words[0], x.words[1]}]++;
  }
  for (int a = 1; a <= 2; ++a)
    for (int b = 1; b <= 2; ++b) {
      Sentence x{{a, b}};
      double q = marginal_prob(p, x);
      double freq = counts[{a, b}] / static_cast<double>(N);
      double se = std::sqrt(q * (1 - q) / N);
      CHECK(std::abs(freq - q) < 3 * se + 1e-12);
    }
}

TEST_CASE("sampling is deterministic given the seed") {
  Rng rng(33);
  ModelFamily fam{FamilyKind::pcfg_ie, 2, 3};
  ModelParams p = random_params(fam, rng);
  Rng s1(99), s2(99);
  for (int i = 0; i < 20; ++i) {
    Sentence a = sample_sentence(p, 4, s1);
    Sentence b = sample_sentence(p, 4, s2);
    CHECK(a.words == b.words);
  }
}

TEST_CASE("point-mass emissions make words deterministic") {
  int k = 2;
  ModelFamily fam{FamilyKind::pcfg, k, k};
  Rng rng(17);
  ModelParams p = random_params(fam, rng);
  p.O = Matrix::Identity(k, k);  // state s always emits word s+1
  Rng sampler(5);
  for (int i = 0; i < 50; ++i) {
    Sentence x = sample_sentence(p, 3, sampler);
    for (int w : x.words) CHECK((w == 1 || w == 2));
  }
}

TEST_CASE("stationary distribution") {
  Matrix dbl(3, 3);
  dbl << 0.2, 0.3, 0.5, 0.3, 0.5, 0.2, 0.5, 0.2, 0.3;
  Vector pi = stationary_distribution(dbl);
  for (int i = 0; i < 3; ++i) CHECK(pi(i) == doctest::Approx(1.0 / 3).epsilon(1e-10));

  Matrix a(2, 2);
  a << 0.9, 0.2, 0.1, 0.8;
  Vector p2 = stationary_distribution(a);
  CHECK((a * p2 - p2).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(p2(0) == doctest::Approx(2.0 / 3).epsilon(1e-10));

  CHECK_THROWS_AS(stationary_distribution(Matrix::Identity(2, 2)), ConditioningError);
}

TEST_CASE("free parameter counts") {
  CHECK(free_dim(ModelFamily{FamilyKind::pcfg_ie, 2, 2}) == 5);
  CHECK(free_dim(ModelFamily{FamilyKind::dep_ies, 0, 2}) == 2);
  CHECK(free_dim(ModelFamily{FamilyKind::hmm, 2, 3}) == 7);
  CHECK(free_dim(ModelFamily{FamilyKind::pcfg, 2, 2}) == 9);
}

TEST_CASE("vectorize round trip is exact") {
  Rng rng(41);
  for (auto kind : {FamilyKind::pcfg, FamilyKind::pcfg_i, FamilyKind::pcfg_ie,
                    FamilyKind::dep_i, FamilyKind::dep_ie, FamilyKind::dep_ies,
                    FamilyKind::hmm, FamilyKind::lcm}) {
    ModelFamily fam{kind, 3, 2};
    if (fam.is_dependency()) fam.k = 0;
    ModelParams p = random_params(fam, rng);
    Vector theta = vectorize_params(p);
    CHECK(theta.size() == free_dim(fam));
    ModelParams q = unvectorize_params(fam, theta);
    CHECK((raw_vector(p) - raw_vector(q)).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("unvectorize rejects out-of-simplex vectors") {
  ModelFamily fam{FamilyKind::lcm, 2, 2};
  Vector bad(free_dim(fam));
  bad.setConstant(1.5);
  CHECK_THROWS_AS(unvectorize_params(fam, bad), DimensionError);
  Vector neg(free_dim(fam));
  neg.setConstant(-0.1);
  CHECK_THROWS_AS(unvectorize_params(fam, neg), DimensionError);
}

TEST_CASE("dep-ies stationarity invariant") {
  Rng rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    ModelParams p = random_params(ModelFamily{FamilyKind::dep_ies, 0, 3}, rng);
    CHECK((p.A * p.pi - p.pi).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("validate reports broken invariants") {
  Rng rng(60);
  ModelParams p = random_params(ModelFamily{FamilyKind::hmm, 2, 2}, rng);
  CHECK_NOTHROW(p.validate());
  p.T(0, 0) += 0.1;
  CHECK_THROWS_AS(p.validate(), DimensionError);
}

TEST_SUITE_END();
