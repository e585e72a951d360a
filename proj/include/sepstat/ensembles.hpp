#pragma once

// The space of rho-ensembles: every ensemble of length N >= r is
// psi_i = sum_a z_{ia} e_a for an N x r matrix z with orthonormal columns.

#include <string>

#include "sepstat/quantum_core.hpp"

namespace sepstat {

inline constexpr double kStiefelTol = 1e-12;

/// z^dagger z - 1.
inline ComplexMatrix constraint_residual(const ComplexMatrix& z) {
  return z.adjoint() * z - ComplexMatrix::Identity(z.cols(), z.cols());
}

/// N x r complex matrix with z^dagger z = 1 (a point of V_{N,r}).
class StiefelPoint {
 public:
  StiefelPoint() = default;

  explicit StiefelPoint(ComplexMatrix z, double tol = kStiefelTol) : z_(std::move(z)) {
    if (z_.cols() < 1 || z_.rows() < z_.cols())
      throw ValidationError("StiefelPoint: need N >= r >= 1, got " + std::to_string(z_.rows()) + "x" +
                            std::to_string(z_.cols()));
    const double err = max_abs(constraint_residual(z_));
    if (!(err <= tol)) throw ValidationError("StiefelPoint: columns not orthonormal (error " + std::to_string(err) + ")");
  }

  [[nodiscard]] int length() const { return static_cast<int>(z_.rows()); }
  [[nodiscard]] int rank() const { return static_cast<int>(z_.cols()); }
  [[nodiscard]] const ComplexMatrix& matrix() const { return z_; }

 private:
  ComplexMatrix z_ = ComplexMatrix::Ones(1, 1);
};

/// Ensemble vectors psi_i stored as the columns of an mn x N matrix.
struct RhoEnsemble {
  Dims dims;
  ComplexMatrix vectors;

  [[nodiscard]] int length() const { return static_cast<int>(vectors.cols()); }
  [[nodiscard]] PureState vector(int i) const { return {dims, vectors.col(i)}; }
  [[nodiscard]] ComplexMatrix reconstruct() const { return vectors * vectors.adjoint(); }
};

/// psi_i = sum_a z_{ia} e_a. Zero rows of z give zero vectors, which are kept.
inline RhoEnsemble ensemble_from_stiefel(const ComplexMatrix& z, const EigenEnsemble& ens) {
  if (z.cols() != ens.rank())
    throw ValidationError("ensemble_from_stiefel: z has " + std::to_string(z.cols()) + " columns, rank is " +
                          std::to_string(ens.rank()));
  return {ens.dims, ens.vectors * z.transpose()};
}

inline RhoEnsemble ensemble_from_stiefel(const StiefelPoint& z, const EigenEnsemble& ens) {
  return ensemble_from_stiefel(z.matrix(), ens);
}

/// Modified Gram-Schmidt with one re-orthogonalization pass on the columns of a.
inline ComplexMatrix gram_schmidt(ComplexMatrix a) {
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < k; ++j) {
        const cplx proj = a.col(j).dot(a.col(k));  // conj(a_j) . a_k
        a.col(k) -= proj * a.col(j);
      }
    const double nrm = a.col(k).norm();
    if (!(nrm > 0)) throw ValidationError("gram_schmidt: columns are linearly dependent");
    a.col(k) /= nrm;
  }
  return a;
}

/// z = GS[(1_r ; v)] * U. The top r x r block of (1_r ; v) is the identity, so
/// the first r rows of z are linearly independent.
inline StiefelPoint stiefel_from_gs(const ComplexMatrix& v, const ComplexMatrix& u) {
  const auto r = u.rows();
  if (u.cols() != r || v.cols() != r) throw ValidationError("stiefel_from_gs: shape mismatch");
  if (max_abs(u.adjoint() * u - ComplexMatrix::Identity(r, r)) > 1e-10)
    throw ValidationError("stiefel_from_gs: U is not unitary");
  ComplexMatrix stacked(r + v.rows(), r);
  stacked.topRows(r).setIdentity();
  stacked.bottomRows(v.rows()) = v;
  return StiefelPoint(gram_schmidt(std::move(stacked)) * u);
}

/// First r columns of a Haar unitary on C^N.
inline StiefelPoint haar_stiefel(int N, int r, Rng& rng) {
  if (r < 1 || N < r) throw ValidationError("haar_stiefel: need N >= r >= 1");
  return StiefelPoint(haar_unitary(N, rng).leftCols(r));
}

inline StiefelPoint haar_stiefel(int N, int r, std::uint64_t seed) {
  Rng rng(seed);
  return haar_stiefel(N, r, rng);
}

/// (1_r ; 0): the eigenensemble padded with N - r zero vectors.
inline StiefelPoint identity_stiefel(int N, int r) {
  ComplexMatrix z = ComplexMatrix::Zero(N, r);
  z.topRows(r).setIdentity();
  return StiefelPoint(std::move(z));
}

/// Caratheodory bound on the length of a product decomposition: m^2 n^2.
inline int caratheodory_length(int m, int n) {
  if (m < 1 || n < 1) throw ValidationError("caratheodory_length: dimensions must be >= 1");
  return m * m * n * n;
}

}  // namespace sepstat
