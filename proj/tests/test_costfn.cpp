#include <gtest/gtest.h>

#include "sepstat/costfn.hpp"
#include "test_support.hpp"

using namespace sepstat;
using namespace testing_support;

namespace {

double oracle_energy(const ComplexMatrix& z, const EigenEnsemble& ens) {
  const ComplexMatrix psi = ens.vectors * z.transpose();
  double e = 0;
  for (Eigen::Index i = 0; i < psi.cols(); ++i) e += oracle_concurrence_sq(psi.col(i), ens.dims.m, ens.dims.n);
  return e;
}

}  // namespace

TEST(Antisymmetrizer, IsProjectorOfRightRank) {
  for (int d = 2; d <= 4; ++d) {
    const ComplexMatrix p = antisymmetrizer(d);
    EXPECT_LT(max_abs(p * p - p), 1e-15);
    EXPECT_LT(max_abs(p - p.adjoint()), 1e-15);
    EXPECT_NEAR(p.trace().real(), d * (d - 1) / 2.0, 1e-14);
  }
}

TEST(CostOperator, TensorAndFactoredFormsAgree) {
  Rng rng(41);
  for (int state = 0; state < 8; ++state) {
    const Dims d = state % 2 ? Dims{2, 3} : Dims{2, 2};
    const EigenEnsemble ens = eigen_ensemble(random_density_matrix(d, 2 + state % 3, rng));
    const CostOperator cop = cost_operator(ens);
    // T is Hermitian and symmetric in each index pair.
    const ComplexMatrix& t = cop.tensor();
    EXPECT_LT(max_abs(t - t.adjoint()), 1e-14);
    const int r = cop.rank();
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b)
        for (int m = 0; m < r; ++m)
          for (int n = 0; n < r; ++n) EXPECT_LT(std::abs(cop.element(a, b, m, n) - cop.element(b, a, n, m)), 1e-15);
    for (int trial = 0; trial < 20; ++trial) {
      const ComplexMatrix z = haar_stiefel(r + 5, r, rng).matrix();
      const double e_oracle = oracle_energy(z, ens);
      EXPECT_LT(rel_diff(energy(z, cop), e_oracle), 1e-10);
      EXPECT_LT(rel_diff(energy_via_h(z, cop.hset()), e_oracle), 1e-10);
    }
  }
}

TEST(CostOperator, RowEnergyIsConcurrence) {
  Rng rng(42);
  const EigenEnsemble ens = eigen_ensemble(random_density_matrix({2, 3}, 5, rng));
  const CostOperator cop = cost_operator(ens);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexVector z = ginibre(5, 1, rng).col(0);
    EXPECT_LT(rel_diff(cop.row_energy(z), oracle_concurrence_sq(ens.vectors * z, 2, 3)), 1e-10);
  }
}

TEST(CostOperator, LocalUnitaryInvariance) {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const Dims d{2, 3};
    const EigenEnsemble ens = eigen_ensemble(random_density_matrix(d, 4, rng));
    EigenEnsemble rotated = ens;
    rotated.vectors = kron(haar_unitary(2, rng), haar_unitary(3, rng)) * ens.vectors;
    const ComplexMatrix z = haar_stiefel(9, 4, rng).matrix();
    EXPECT_LT(rel_diff(energy(z, cost_operator(ens)), energy(z, cost_operator(rotated))), 1e-10);
  }
}

TEST(CostOperator, WrongShapeThrows) {
  Rng rng(44);
  const CostOperator cop = cost_operator(eigen_ensemble(random_density_matrix({2, 2}, 3, rng)));
  EXPECT_THROW(energy(ComplexMatrix::Identity(4, 2), cop), ValidationError);
  EXPECT_THROW(energy_via_h(ComplexMatrix::Identity(4, 4), cop.hset()), ValidationError);
}

TEST(LagrangeMultipliers, Validation) {
  EXPECT_THROW(LagrangeMultipliers(ComplexMatrix::Ones(2, 3)), ValidationError);
  ComplexMatrix nh = ComplexMatrix::Identity(2, 2);
  nh(0, 1) = 1.0;
  EXPECT_THROW(LagrangeMultipliers{nh}, ValidationError);
  EXPECT_THROW(LagrangeMultipliers(ComplexMatrix::Zero(2, 2)), ValidationError);
  ComplexMatrix indefinite = ComplexMatrix::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  EXPECT_FALSE(LagrangeMultipliers(indefinite).is_positive_definite());
  EXPECT_TRUE(LagrangeMultipliers(ComplexMatrix::Identity(2, 2)).is_positive_definite());
}

TEST(FullHamiltonian, ConstraintTerm) {
  Rng rng(45);
  const EigenEnsemble ens = eigen_ensemble(random_density_matrix({2, 2}, 3, rng));
  const CostOperator cop = cost_operator(ens);
  const LagrangeMultipliers lm(random_hermitian(3, rng));
  // On the manifold the constraint term vanishes.
  const ComplexMatrix z = haar_stiefel(6, 3, rng).matrix();
  EXPECT_LT(rel_diff(full_hamiltonian(z, cop, lm), energy(z, cop)), 1e-12);
  // Off the manifold it is sum_i <z_i|omega z_i> - tr omega.
  const ComplexMatrix w = ginibre(6, 3, rng);
  double constraint = -lm.matrix().trace().real();
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const ComplexVector wi = w.row(i).transpose();
    constraint += wi.dot(lm.matrix() * wi).real();
  }
  EXPECT_LT(rel_diff(full_hamiltonian(w, cop, lm), energy(w, cop) + constraint), 1e-12);
}
