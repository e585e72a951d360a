#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sepstat {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Random engine used everywhere. State is always owned by the caller.
using Rng = std::mt19937_64;

inline constexpr double kPi = 3.14159265358979323846;

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input (bad dimensions, invalid states, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The model has no solution for the requested parameters, e.g. the
/// averaged constraints cannot be satisfied.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to reach its requested accuracy.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

enum class Subsystem { A, B };

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of the independent stream `stream` derived from a master seed.
///
/// Stream k is seeded with splitmix64(splitmix64(master) ^ (k + 1)), so
/// streams are decorrelated and the mapping does not depend on how many
/// threads consume them.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(master) ^ (stream + 1));
}

/// Standard complex Gaussian: E|g|^2 = 1.
inline cplx complex_normal(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double re = normal(rng);
  const double im = normal(rng);
  return {re * M_SQRT1_2, im * M_SQRT1_2};
}

inline ComplexMatrix ginibre(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  ComplexMatrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = complex_normal(rng);
  return g;
}

inline double max_abs(const ComplexMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool all_finite(const ComplexMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const cplx v = m.data()[i];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

}  // namespace sepstat
