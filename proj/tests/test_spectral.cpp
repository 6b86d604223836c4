#include <doctest.h>

#include "lunmix/spectral.hpp"

using namespace lunmix;

namespace {

// column matching by greedy max correlation, exhaustive for small k
double column_match_error(const Matrix& got, const Matrix& want) {
  int k = static_cast<int>(want.cols());
  std::vector<int> perm(k);
  for (int i = 0; i < k; ++i) perm[i] = i;
  double best = std::numeric_limits<double>::infinity();
  do {
    double err = 0.0;
    for (int j = 0; j < k; ++j) {
      // scale-invariant comparison: align on the largest entry
      Vector a = got.col(j), b = want.col(perm[j]);
      int idx;
      b.cwiseAbs().maxCoeff(&idx);
      if (std::abs(a(idx)) < 1e-300) return std::numeric_limits<double>::infinity();
      err = std::max(err, (a * (b(idx) / a(idx)) - b).lpNorm<Eigen::Infinity>());
    }
    best = std::min(best, err);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_SUITE_BEGIN("spectral");

TEST_CASE("pseudoinverse satisfies the Penrose identities") {
  CHECK((pseudoinverse(Matrix::Identity(4, 4)) - Matrix::Identity(4, 4))
            .lpNorm<Eigen::Infinity>() < 1e-14);
  Rng rng(3);
  Matrix M = random_stochastic(5, 3, rng);
  Matrix P = pseudoinverse(M);
  double scale = M.norm();
  CHECK((M * P * M - M).norm() < 1e-10 * scale);
  CHECK((P * M * P - P).norm() < 1e-10 * scale);
  CHECK((M * P - (M * P).transpose()).norm() < 1e-10 * scale);
  CHECK((P * M - (P * M).transpose()).norm() < 1e-10 * scale);

  // rank-deficient input
  Matrix R(4, 3);
  R.col(0) = Vector::LinSpaced(4, 1, 4);
  R.col(1) = 2 * R.col(0);
  R.col(2) = Vector::Unit(4, 2);
  Matrix Q = pseudoinverse(R);
  CHECK((R * Q * R - R).norm() < 1e-10 * R.norm());
}

TEST_CASE("rowspace membership") {
  Matrix M(2, 2);
  M << 1, 2, 3, 4;  // invertible
  CHECK(in_rowspace(M, Vector::Unit(2, 0), 1e-10).in);
  CHECK(in_rowspace(M, Vector::Unit(2, 1), 1e-10).in);

  Matrix Z = Matrix::Zero(3, 3);
  Z(0, 0) = 1;
  Z(1, 1) = 1;  // third column dead
  auto rc = in_rowspace(Z, Vector::Unit(3, 2), 1e-10);
  CHECK_FALSE(rc.in);
  CHECK(rc.residual == doctest::Approx(1.0));
}

TEST_CASE("decompose identity example") {
  int k = 3;
  Matrix X = Matrix::Identity(k, k);
  Matrix Y = Vector::LinSpaced(k, 1, k).asDiagonal();
  DecomposeResult r = decompose(X, Y, k);
  std::vector<double> eigs;
  for (int i = 0; i < k; ++i) eigs.push_back(r.eigenvalues(i).real());
  std::sort(eigs.begin(), eigs.end());
  for (int i = 0; i < k; ++i) CHECK(eigs[i] == doctest::Approx(i + 1).epsilon(1e-10));
  // each column of the output is a scaled standard basis vector
  for (int j = 0; j < k; ++j) {
    Vector c = r.M1.col(j).cwiseAbs();
    int idx;
    double mx = c.maxCoeff(&idx);
    c(idx) = 0;
    CHECK(c.lpNorm<Eigen::Infinity>() < 1e-10 * mx);
  }
}

TEST_CASE("decompose recovers a planted factor") {
  Rng rng(11);
  Matrix M1 = random_stochastic(5, 3, rng);
  Matrix M2 = random_stochastic(5, 3, rng);
  Vector dvals(3);
  dvals << 0.3, 0.7, 1.1;
  Matrix X = M1 * M2.transpose();
  Matrix Y = M1 * dvals.asDiagonal() * M2.transpose();
  DecomposeResult r = decompose(X, Y, 3);
  CHECK(column_match_error(r.M1, M1) < 1e-8);
  std::vector<double> eigs;
  for (int i = 0; i < 3; ++i) eigs.push_back(r.eigenvalues(i).real());
  std::sort(eigs.begin(), eigs.end());
  CHECK(eigs[0] == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(eigs[1] == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(eigs[2] == doctest::Approx(1.1).epsilon(1e-9));
  CHECK(r.imaginary_residue < 1e-9);
}

TEST_CASE("decompose property suite") {
  Rng rng(21);
  std::uniform_int_distribution<int> dpick(2, 8);
  int done = 0;
  for (int trial = 0; done < 100; ++trial) {
    int d = dpick(rng);
    std::uniform_int_distribution<int> kpick(1, std::min(d, 5));
    int k = kpick(rng);
    Matrix M1 = random_stochastic(d, k, rng);
    Matrix M2 = random_stochastic(d, k, rng);
    Vector dv = uniform_vector(k, rng) * 2.0;
    // ensure planted eigenvalue separation well above the guard
    bool ok = true;
    for (int i = 0; i < k && ok; ++i)
      for (int j = i + 1; j < k; ++j)
        if (std::abs(dv(i) - dv(j)) < 1e-3) ok = false;
    if (!ok) continue;
    Matrix X = M1 * M2.transpose();
    Matrix Y = M1 * dv.asDiagonal() * M2.transpose();
    DecomposeResult r = decompose(X, Y, k);
    CHECK(column_match_error(r.M1, M1) < 1e-7);
    std::vector<double> got, want;
    for (int i = 0; i < k; ++i) {
      got.push_back(r.eigenvalues(i).real());
      want.push_back(dv(i));
    }
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    for (int i = 0; i < k; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-9);
    ++done;
  }
}

TEST_CASE("decompose rejects degenerate inputs") {
  Rng rng(31);
  Matrix M1 = random_stochastic(4, 3, rng);
  Matrix M2 = random_stochastic(4, 3, rng);
  // repeated D entries
  Vector dv(3);
  dv << 0.5, 0.5, 1.0;
  Matrix X = M1 * M2.transpose();
  Matrix Y = M1 * dv.asDiagonal() * M2.transpose();
  CHECK_THROWS_AS(decompose(X, Y, 3), ConditioningError);

  // rank of X below k
  Matrix Mlow = M1;
  Mlow.col(2) = Mlow.col(1);
  Matrix Xlow = Mlow * M2.transpose();
  Matrix Ylow = Mlow * Vector::LinSpaced(3, 1, 3).asDiagonal() * M2.transpose();
  CHECK_THROWS_AS(decompose(Xlow, Ylow, 3), ConditioningError);
}

TEST_CASE("normalize columns") {
  Matrix m(2, 2);
  m << 1, 3, 1, 1;
  Matrix n = normalize_columns_to_stochastic(m);
  CHECK(n(0, 0) == doctest::Approx(0.5));
  CHECK(n(0, 1) == doctest::Approx(0.75));
  CHECK((normalize_columns_to_stochastic(n) - n).lpNorm<Eigen::Infinity>() == 0.0);

  // A Pi S with stochastic A comes back as exactly A Pi
  Rng rng(41);
  Matrix A = random_stochastic(4, 3, rng);
  Matrix APS(4, 3);
  APS.col(0) = A.col(2) * 0.5;
  APS.col(1) = A.col(0) * -2.0;
  APS.col(2) = A.col(1) * 4.0;
  Matrix back = normalize_columns_to_stochastic(APS);
  CHECK((back.col(0) - A.col(2)).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((back.col(1) - A.col(0)).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((back.col(2) - A.col(1)).lpNorm<Eigen::Infinity>() < 1e-14);

  CHECK_THROWS_AS(normalize_columns_to_stochastic(Matrix::Zero(2, 2)),
                  ConditioningError);
}

TEST_SUITE_END();
