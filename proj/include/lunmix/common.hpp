#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lunmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Error categories; the CLI maps them onto exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EnumerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConditioningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// splitmix64 step; used to derive per-cell seeds from a master seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Flat Dirichlet draw: normalized Exp(1) variates, almost surely interior.
inline Vector dirichlet_flat(int n, Rng& rng) {
  std::exponential_distribution<double> exp1(1.0);
  Vector v(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    v(i) = exp1(rng);
    total += v(i);
  }
  return v / total;
}

// Each column drawn from the flat Dirichlet on the simplex.
inline Matrix random_stochastic(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c) m.col(c) = dirichlet_flat(rows, rng);
  return m;
}

inline Vector uniform_vector(int n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace lunmix
