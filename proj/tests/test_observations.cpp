#include <doctest.h>

#include "lunmix/hypergraph.hpp"
#include "lunmix/observations.hpp"

using namespace lunmix;

TEST_SUITE_BEGIN("observations");

TEST_CASE("enumeration conventions") {
  auto thin = ObservationSpec::make(ObsFamily::all_thin_triples, {eta_ones(2)});
  auto ids = enumerate_observations(thin, 3);
  REQUIRE(ids.size() == 3);
  CHECK(ids[0].name(thin.etas) == "123etaones");
  CHECK(ids[1].name(thin.etas) == "132etaones");
  CHECK(ids[2].name(thin.etas) == "231etaones");

  auto pairs = ObservationSpec::make(ObsFamily::all_pairs);
  auto pids = enumerate_observations(pairs, 3);
  REQUIRE(pids.size() == 3);
  CHECK(pids[0].pos == std::array<int, 3>{1, 2, 0});
  CHECK(pids[1].pos == std::array<int, 3>{1, 3, 0});
  CHECK(pids[2].pos == std::array<int, 3>{2, 3, 0});

  CHECK(enumerate_observations(ObservationSpec::make(ObsFamily::pairs), 5).size() == 1);
  CHECK(enumerate_observations(ObservationSpec::make(ObsFamily::triples), 2).empty());
  CHECK(enumerate_observations(
            ObservationSpec::make(ObsFamily::thin_triples, {eta_e1(2)}), 5)
            .size() == 3);
  CHECK(enumerate_observations(ObservationSpec::make(ObsFamily::all_triples), 5)
            .size() == 10);
  CHECK(enumerate_observations(
            ObservationSpec::make(ObsFamily::all_thin_triples, {eta_e1(2)}), 5)
            .size() == 30);
}

TEST_CASE("eta validation") {
  CHECK_THROWS_AS(ObservationSpec::make(ObsFamily::thin_triples), ConfigError);
  CHECK_THROWS_AS(ObservationSpec::make(ObsFamily::pairs, {eta_ones(2)}), ConfigError);
}

TEST_CASE("eval_phi one-hot outer products") {
  int d = 5;
  Sentence x{{3, 5, 1}};
  ObsId pair{ObsId::Kind::pair, {1, 2, 0}};
  Vector v = eval_phi(pair, {}, x, d);
  CHECK(v.sum() == 1.0);
  CHECK(v((3 - 1) * d + (5 - 1)) == 1.0);

  std::vector<Eta> etas = {eta_ones(d), eta_e1(d)};
  ObsId thin{ObsId::Kind::thin_triple, {1, 2, 3}, 0};
  CHECK((eval_phi(thin, etas, x, d) - v).lpNorm<Eigen::Infinity>() == 0.0);

  ObsId thin_e1{ObsId::Kind::thin_triple, {1, 2, 3}, 1};
  CHECK(eval_phi(thin_e1, etas, x, d).lpNorm<Eigen::Infinity>() == 1.0);  // x3 == 1
  Sentence y{{3, 5, 2}};
  CHECK(eval_phi(thin_e1, etas, y, d).lpNorm<Eigen::Infinity>() == 0.0);

  ObsId bad{ObsId::Kind::pair, {1, 4, 0}};
  CHECK_THROWS_AS(eval_phi(bad, {}, x, d), DimensionError);
}

TEST_CASE("empirical moments") {
  auto spec = ObservationSpec::make(ObsFamily::all_pairs);
  Sentence x{{1, 2, 2}};
  MomentSet ms = empirical_moments({x}, spec, 2, {3});
  REQUIRE(ms.ids[3].size() == 3);
  for (size_t i = 0; i < ms.ids[3].size(); ++i)
    CHECK((ms.values[3][i] - eval_phi(ms.ids[3][i], {}, x, 2)).lpNorm<Eigen::Infinity>() ==
          0.0);

  CHECK_THROWS_WITH_AS(empirical_moments({x}, spec, 2, {2}), "no samples of length 2",
                       ConfigError);

  // averages stay in [0,1] and sum to one per full moment
  Sentence y{{2, 1, 1}};
  MomentSet avg = empirical_moments({x, y}, spec, 2, {3});
  for (const auto& v : avg.values[3]) {
    CHECK(v.sum() == doctest::Approx(1.0));
    CHECK(v.minCoeff() >= 0.0);
    CHECK(v.maxCoeff() <= 1.0);
  }
}

TEST_CASE("empirical moments converge to the exact moments") {
  Rng rng(81);
  ModelParams p = random_params(ModelFamily{FamilyKind::dep_ie, 0, 2}, rng);
  auto spec = ObservationSpec::make(ObsFamily::all_pairs);
  MomentSet exact = exact_moments(p, spec, 2);
  const int N = 1000000;
  Rng sampler(4242);
  std::vector<Sentence> corpus;
  corpus.reserve(N);
  for (int i = 0; i < N; ++i) corpus.push_back(sample_sentence(p, 2, sampler));
  MomentSet emp = empirical_moments(corpus, spec, 2, {2});
  const Vector& want = exact.flat(2, 0);
  const Vector& got = emp.flat(2, 0);
  for (int i = 0; i < want.size(); ++i) {
    double se = std::sqrt(want(i) * (1 - want(i)) / N);
    CHECK(std::abs(got(i) - want(i)) < 3 * se + 1e-12);
  }
}

TEST_SUITE_END();
