#include <gtest/gtest.h>

#include "sepstat/concurrence.hpp"
#include "test_support.hpp"

using namespace sepstat;
using namespace testing_support;

namespace {

ComplexVector bell_singlet() {
  ComplexVector v = ComplexVector::Zero(4);
  v(1) = M_SQRT1_2;
  v(2) = -M_SQRT1_2;
  return v;
}

}  // namespace

TEST(Concurrence, ProductAndBell) {
  Rng rng(21);
  const ComplexVector a = ginibre(3, 1, rng).col(0), b = ginibre(2, 1, rng).col(0);
  EXPECT_LT(concurrence_sq(PureState({3, 2}, tensor_product(a, b))), 1e-14);
  EXPECT_NEAR(concurrence_sq(PureState({2, 2}, bell_singlet())), 0.5, 1e-15);
}

TEST(Concurrence, MatchesSchmidtOracle) {
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims d{2 + trial % 3, 2 + (trial / 3) % 3};
    const ComplexVector v = ginibre(d.total(), 1, rng).col(0);
    EXPECT_NEAR(concurrence_sq(PureState(d, v)), oracle_concurrence_sq(v, d.m, d.n), 1e-12 * v.squaredNorm() * v.squaredNorm());
  }
}

TEST(Concurrence, SkewFormMatchesDirect) {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims d{2 + trial % 3, 2 + (trial / 3) % 3};
    const PureState psi(d, ginibre(d.total(), 1, rng).col(0));
    const double direct = concurrence_sq(psi);
    EXPECT_NEAR(concurrence_sq_skew(psi, skew_basis(d.m), skew_basis(d.n)), direct, 1e-10 * std::max(direct, 1.0));
  }
}

TEST(Concurrence, HomogeneityAndLocalUnitaryInvariance) {
  Rng rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    const Dims d{2 + trial % 2, 3};
    const PureState psi(d, ginibre(d.total(), 1, rng).col(0));
    const cplx t(uniform(rng, -2, 2), uniform(rng, -2, 2));
    EXPECT_LT(rel_diff(concurrence_sq(psi.scaled(t)), std::pow(std::abs(t), 4) * concurrence_sq(psi)), 1e-10);
    const ComplexMatrix u = kron(haar_unitary(d.m, rng), haar_unitary(d.n, rng));
    EXPECT_LT(rel_diff(concurrence_sq(PureState(d, u * psi.amps())), concurrence_sq(psi)), 1e-10);
  }
}

TEST(Concurrence, ProductTests) {
  Rng rng(25);
  const ComplexVector a = ginibre(2, 1, rng).col(0).normalized(), b = ginibre(2, 1, rng).col(0).normalized();
  const PureState prod({2, 2}, tensor_product(a, b));
  EXPECT_TRUE(is_product(prod));
  EXPECT_NEAR(det_product_test(prod), 0.0, 1e-14);
  const PureState bell({2, 2}, bell_singlet());
  EXPECT_FALSE(is_product(bell));
  // For qubits det(sigma - 1) = det sigma = |det C|^2 on normalized states.
  EXPECT_NEAR(det_product_test(bell), 0.25, 1e-14);
  EXPECT_THROW(is_product(PureState({2, 2}, ComplexVector::Zero(4))), ValidationError);
  EXPECT_THROW(det_product_test(bell.scaled(2.0)), ValidationError);
}

TEST(SkewBasis, OrthonormalAntisymmetric) {
  for (int m = 2; m <= 5; ++m) {
    const SkewBasis b = skew_basis(m);
    EXPECT_EQ(b.size(), m * (m - 1) / 2);
    EXPECT_LT(max_abs(b.vectors.adjoint() * b.vectors - ComplexMatrix::Identity(b.size(), b.size())), 1e-15);
    for (int k = 0; k < b.size(); ++k)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) EXPECT_EQ(b.vectors(i * m + j, k), -b.vectors(j * m + i, k));
  }
  EXPECT_THROW(skew_basis(1), ValidationError);
}

TEST(SkewAmplitudes, SingletOverlap) {
  const PureState s({2, 2}, bell_singlet());
  const ComplexMatrix amp = skew_amplitudes(s, s, skew_basis(2), skew_basis(2));
  ASSERT_EQ(amp.rows(), 1);
  ASSERT_EQ(amp.cols(), 1);
  EXPECT_NEAR(amp(0, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(amp(0, 0).imag(), 0.0, 1e-15);
}

TEST(HMatrices, SymmetricAndReproduceConcurrence) {
  Rng rng(26);
  for (int trial = 0; trial < 10; ++trial) {
    const Dims d{2, 3};
    const EigenEnsemble ens = eigen_ensemble(random_density_matrix(d, 2 + trial % 5, rng));
    const HMatrixSet hs = h_matrices(ens);
    EXPECT_EQ(hs.d1, 1);
    EXPECT_EQ(hs.d2, 3);
    for (const auto& h : hs.matrices) EXPECT_LT(max_abs(h - h.transpose()), 1e-14);
    // z^T h^{ab} z = <zeta_a zeta~_b | psi psi> for psi = sum z_a e_a.
    const ComplexVector z = ginibre(ens.rank(), 1, rng).col(0);
    double acc = 0;
    for (const auto& h : hs.matrices) acc += std::norm((z.transpose() * h * z).value());
    const PureState psi(d, ens.vectors * z);
    EXPECT_LT(rel_diff(kSkewPrefactor * acc, oracle_concurrence_sq(psi.amps(), d.m, d.n)), 1e-10);
  }
}
