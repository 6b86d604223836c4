#include <doctest.h>

#include "lunmix/evaluation.hpp"

using namespace lunmix;

TEST_SUITE_BEGIN("evaluation");

TEST_CASE("match on identical parameters") {
  Rng rng(1);
  ModelParams p = random_params(ModelFamily{FamilyKind::pcfg_ie, 3, 3}, rng);
  MatchReport r = match_params(p, p);
  CHECK(r.matched_error == 0.0);
  CHECK(r.permutation == std::vector<int>{0, 1, 2});
}

TEST_CASE("match recovers a hidden-state relabeling") {
  Rng rng(2);
  ModelParams p = random_params(ModelFamily{FamilyKind::hmm, 3, 4}, rng);
  std::vector<int> perm = {2, 0, 1};
  ModelParams q = relabel_states(p, perm);
  MatchReport r = match_params(q, p);
  CHECK(r.matched_error < 1e-15);
  CHECK(r.permutation == perm);

  // symmetry of the matched error
  MatchReport rr = match_params(p, q);
  CHECK(rr.matched_error < 1e-15);
}

TEST_CASE("matched error tracks a small perturbation") {
  Rng rng(3);
  ModelParams p = random_params(ModelFamily{FamilyKind::pcfg_ie, 2, 3}, rng);
  ModelParams q = p;
  double eps = 1e-3;
  q.T.array() += eps;  // uniform perturbation, columns re-sum to 1 + 2e-3
  for (int c = 0; c < q.T.cols(); ++c) q.T.col(c) /= q.T.col(c).sum();
  MatchReport r = match_params(q, p);
  CHECK(r.matched_error > eps / 10);
  CHECK(r.matched_error < eps * 10);
}

TEST_CASE("relabeling invariance of the matched error") {
  Rng rng(4);
  ModelParams truth = random_params(ModelFamily{FamilyKind::pcfg_ie, 3, 3}, rng);
  ModelParams est = random_params(ModelFamily{FamilyKind::pcfg_ie, 3, 3}, rng);
  double base = match_params(est, truth).matched_error;
  for (auto perm : {std::vector<int>{1, 2, 0}, std::vector<int>{2, 1, 0}}) {
    CHECK(match_params(est, relabel_states(truth, perm)).matched_error ==
          doctest::Approx(base).epsilon(1e-12));
    CHECK(match_params(relabel_states(est, perm), truth).matched_error ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("dependency families compare directly") {
  Rng rng(5);
  ModelParams p = random_params(ModelFamily{FamilyKind::dep_ie, 0, 3}, rng);
  MatchReport r = match_params(p, p);
  CHECK(r.matched_error == 0.0);
  CHECK(r.permutation.empty());
  CHECK_THROWS_AS(
      match_params(p, random_params(ModelFamily{FamilyKind::dep_ie, 0, 2}, rng)),
      DimensionError);
}

TEST_CASE("relabeling leaves pcfg moments unchanged") {
  Rng rng(6);
  ModelParams p = random_params(ModelFamily{FamilyKind::pcfg, 2, 2}, rng);
  ModelParams q = relabel_states(p, {1, 0});
  auto spec = ObservationSpec::make(ObsFamily::all_pairs);
  MomentSet mp = brute_force_moments(p, spec, 3);
  MomentSet mq = brute_force_moments(q, spec, 3);
  for (size_t i = 0; i < mp.values[3].size(); ++i)
    CHECK((mp.values[3][i] - mq.values[3][i]).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("brute force guard") {
  Rng rng(7);
  ModelParams p = random_params(ModelFamily{FamilyKind::pcfg, 2, 2}, rng);
  CHECK_THROWS_AS(
      brute_force_moments(p, ObservationSpec::make(ObsFamily::all_pairs), 5),
      EnumerationError);
}

TEST_SUITE_END();
