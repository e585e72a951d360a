#pragma once

// The cost function ("energy") on ensemble space,
//
//   E(z) = sum_i c^2(psi_i(z)) = sum_i sum conj(z_ia) conj(z_ib) E_{ab,mn} z_im z_in,
//
// its factored form through the h^{ab} matrices, and the Lagrange-multiplier
// Hamiltonian used by the partition functions.

#include <string>

#include "sepstat/concurrence.hpp"
#include "sepstat/ensembles.hpp"

namespace sepstat {

/// Calibration of the factored form: E_1(z) = kFactoredPrefactor * sum_ab |z^T h^{ab} z|^2.
/// Equal to the skew prefactor since z^T h^{ab} z = <zeta_a zeta~_b | psi psi>.
inline constexpr double kFactoredPrefactor = kSkewPrefactor;

/// Projector onto C^d ^ C^d, i.e. (1 - SWAP) / 2.
inline ComplexMatrix antisymmetrizer(int d) {
  ComplexMatrix p = 0.5 * ComplexMatrix::Identity(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) p(i * d + j, j * d + i) -= 0.5;
  return p;
}

/// Rank-4 cost tensor, stored as an r^2 x r^2 matrix T with
/// T(a r + b, m r + n) = E_{ab,mn}, symmetrized in (a,b) and in (m,n), together
/// with the equivalent factored form.
class CostOperator {
 public:
  CostOperator() = default;
  CostOperator(int rank, ComplexMatrix tensor, HMatrixSet hset)
      : rank_(rank), tensor_(std::move(tensor)), hset_(std::move(hset)) {}

  [[nodiscard]] int rank() const { return rank_; }
  [[nodiscard]] const ComplexMatrix& tensor() const { return tensor_; }
  [[nodiscard]] const HMatrixSet& hset() const { return hset_; }

  [[nodiscard]] cplx element(int a, int b, int m, int n) const { return tensor_(a * rank_ + b, m * rank_ + n); }

  /// One-particle energy E_1(z) = c^2(sum_a z_a e_a), evaluated through the
  /// factored form.
  [[nodiscard]] double row_energy(const Eigen::Ref<const ComplexVector>& z) const {
    double acc = 0.0;
    for (const auto& h : hset_.matrices) acc += std::norm((z.transpose() * (h * z)).value());
    return kFactoredPrefactor * acc;
  }

 private:
  int rank_ = 0;
  ComplexMatrix tensor_;
  HMatrixSet hset_;
};

/// Builds E from the skew projectors Pi_m (x) Pi_n directly, and the h^{ab}
/// matrices from the skew bases; the two routes are checked against each other
/// in the tests.
inline CostOperator cost_operator(const EigenEnsemble& ens) {
  const Dims& d = ens.dims;
  const int r = ens.rank();
  const int mn = d.total();

  // Pi_m (x) Pi_n acting on (A A') (x) (B B').
  const ComplexMatrix proj = tensor_product(antisymmetrizer(d.m), antisymmetrizer(d.n));

  ComplexMatrix doubled(mn * mn, r * r);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b)
      doubled.col(a * r + b) = reorder_to_doubled_factors(tensor_product(ComplexVector(ens.vectors.col(a)), ComplexVector(ens.vectors.col(b))), d);

  ComplexMatrix t = kFactoredPrefactor * (doubled.adjoint() * proj * doubled);

  // Symmetrize over a <-> b and m <-> n: only the symmetric part couples to z_a z_b.
  ComplexMatrix sym(r * r, r * r);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b)
      for (int m = 0; m < r; ++m)
        for (int n = 0; n < r; ++n)
          sym(a * r + b, m * r + n) = 0.25 * (t(a * r + b, m * r + n) + t(b * r + a, m * r + n) +
                                              t(a * r + b, n * r + m) + t(b * r + a, n * r + m));
  return {r, std::move(sym), h_matrices(ens)};
}

inline void check_columns(const ComplexMatrix& z, int rank, const char* who) {
  if (z.cols() != rank)
    throw ValidationError(std::string(who) + ": z has " + std::to_string(z.cols()) + " columns, expected " +
                          std::to_string(rank));
}

/// E(z) through the rank-4 tensor.
inline double energy(const ComplexMatrix& z, const CostOperator& cop) {
  check_columns(z, cop.rank(), "energy");
  const int r = cop.rank();
  double total = 0.0;
  ComplexVector w(r * r);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b) w(a * r + b) = z(i, a) * z(i, b);
    total += w.dot(cop.tensor() * w).real();
  }
  return total;
}

/// E(z) through kFactoredPrefactor * sum_i sum_ab |z_i^T h^{ab} z_i|^2.
inline double energy_via_h(const ComplexMatrix& z, const HMatrixSet& hset) {
  check_columns(z, hset.rank, "energy_via_h");
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const ComplexVector zi = z.row(i).transpose();
    for (const auto& h : hset.matrices) total += std::norm((zi.transpose() * h * zi)(0, 0));
  }
  return kFactoredPrefactor * total;
}

/// Hermitian, non-singular matrix of Lagrange multipliers.
class LagrangeMultipliers {
 public:
  LagrangeMultipliers() = default;
  explicit LagrangeMultipliers(ComplexMatrix omega) : omega_(std::move(omega)) {
    if (omega_.rows() != omega_.cols() || omega_.rows() < 1)
      throw ValidationError("LagrangeMultipliers: omega must be square");
    if (max_abs(omega_ - omega_.adjoint()) > 1e-12) throw ValidationError("LagrangeMultipliers: omega must be Hermitian");
    if (std::abs(omega_.determinant()) < 1e-300) throw ValidationError("LagrangeMultipliers: omega is singular");
  }

  [[nodiscard]] const ComplexMatrix& matrix() const { return omega_; }
  [[nodiscard]] int rank() const { return static_cast<int>(omega_.rows()); }

  [[nodiscard]] bool is_positive_definite() const {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(omega_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > 0;
  }

 private:
  ComplexMatrix omega_ = ComplexMatrix::Identity(1, 1);
};

/// H_full = E(z) + sum_ab omega_ab C_ab(z), C_ab = sum_i conj(z_ia) z_ib - delta_ab.
/// The constraint term equals sum_i <z_i|omega z_i> - tr omega and is real.
inline double full_hamiltonian(const ComplexMatrix& z, const CostOperator& cop, const LagrangeMultipliers& lm) {
  check_columns(z, cop.rank(), "full_hamiltonian");
  if (lm.rank() != cop.rank()) throw ValidationError("full_hamiltonian: omega has the wrong size");
  const ComplexMatrix c = constraint_residual(z);
  const cplx constraint = lm.matrix().cwiseProduct(c).sum();
  return energy_via_h(z, cop.hset()) + constraint.real();
}

}  // namespace sepstat
