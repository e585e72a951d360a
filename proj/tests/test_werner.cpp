#include <gtest/gtest.h>

#include "sepstat/werner.hpp"
#include "test_support.hpp"

using namespace sepstat;
using namespace sepstat::werner;
using namespace testing_support;

TEST(WernerState, Endpoints) {
  const ComplexVector s = psi_minus();
  EXPECT_LT(max_abs(werner_state(0).matrix() - s * s.adjoint()), 1e-15);
  EXPECT_LT(max_abs(werner_state(1).matrix() - ComplexMatrix::Identity(4, 4) / 4.0), 1e-15);
  EXPECT_THROW(werner_state(-0.1), ValidationError);
  EXPECT_THROW(werner_state(1.1), ValidationError);
}

TEST(WernerState, SpectrumAtHalf) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(werner_state(0.5).matrix());
  EXPECT_NEAR(es.eigenvalues()(0), 0.125, 1e-15);
  EXPECT_NEAR(es.eigenvalues()(1), 0.125, 1e-15);
  EXPECT_NEAR(es.eigenvalues()(2), 0.125, 1e-15);
  EXPECT_NEAR(es.eigenvalues()(3), 0.625, 1e-15);
}

TEST(WernerEnsemble, ReconstructionAndNorms) {
  for (double p : {0.1, 0.5, 0.9}) {
    const EigenEnsemble e = werner_eigenensemble(p);
    EXPECT_LT(max_abs(e.reconstruct() - werner_state(p).matrix()), 1e-12);
    EXPECT_NEAR(e.vectors.col(0).squaredNorm(), 1 - 0.75 * p, 1e-15);
    for (int a = 1; a < 4; ++a) EXPECT_NEAR(e.vectors.col(a).squaredNorm(), p / 4, 1e-15);
  }
  EXPECT_THROW(werner_eigenensemble(0.0), ValidationError);
}

TEST(HMatrix, MatchesGenericComputationOnGrid) {
  for (int k = 1; k <= 100; ++k) {
    const double p = k / 100.0;
    const HMatrixSet hs = h_matrices(werner_eigenensemble(p));
    ASSERT_EQ(hs.matrices.size(), 1u);
    EXPECT_LT(max_abs(hs.at(0, 0) - h_matrix(p)), 1e-12) << "p = " << p;
  }
}

TEST(HMatrix, Examples) {
  EXPECT_LT(max_abs(h_matrix(1.0) - ComplexMatrix::Identity(4, 4) / 8.0), 1e-15);
  ComplexMatrix h0 = ComplexMatrix::Zero(4, 4);
  h0(0, 0) = 0.5;
  EXPECT_LT(max_abs(h_matrix(0.0) - h0), 1e-15);
  ComplexMatrix h23 = ComplexMatrix::Zero(4, 4);
  h23.diagonal() << 2.0 / 8, (2.0 / 3) / 8, (2.0 / 3) / 8, (2.0 / 3) / 8;
  EXPECT_LT(max_abs(h_matrix(2.0 / 3) - h23), 1e-15);
}

TEST(BellDiagonalH, Reductions) {
  for (double p : {0.2, 0.7, 1.0}) EXPECT_LT(max_abs(bell_diagonal_h(werner_weights(p)) - h_matrix(p)), 1e-12);
  EXPECT_LT(max_abs(bell_diagonal_h({0.25, 0.25, 0.25, 0.25}) - ComplexMatrix::Identity(4, 4) / 8.0), 1e-12);
  const ComplexMatrix h = bell_diagonal_h({0.5, 0.0, 0.3, 0.2});
  EXPECT_EQ(h(1, 1), cplx(0.0));
  EXPECT_NEAR(h(2, 2).real(), 0.3 / 2, 1e-15);
  EXPECT_LT(max_abs(h - ComplexMatrix(h.diagonal().asDiagonal())), 1e-15);
  EXPECT_THROW(bell_diagonal_h({0.5, 0.5, 0.5, -0.5}), ValidationError);
  EXPECT_THROW(bell_diagonal_h({0.5, 0.1, 0.1, 0.1}), ValidationError);
}

TEST(EnergyClosedForm, ExamplesAndCrossCheck) {
  const double p = 0.6;
  EXPECT_NEAR(energy_closed_form(ComplexVector{{1, 0, 0, 0}}, p), std::pow(1 - 0.75 * p, 2) / 2, 1e-15);
  EXPECT_NEAR(energy_closed_form(ComplexVector{{0, 1, 0, 0}}, p), std::pow(p / 4, 2) / 2, 1e-15);
  Rng rng(61);
  for (int k = 0; k < 100; ++k) {
    const double q = uniform(rng, 0.01, 1.0);
    const CostOperator cop = cost_operator(werner_eigenensemble(q));
    const ComplexVector z = ginibre(4, 1, rng).col(0);
    const double generic = energy(ComplexMatrix(z.transpose()), cop);
    EXPECT_LT(rel_diff(energy_closed_form(z, q), generic), 1e-12);
    const ComplexVector psi = werner_eigenensemble(q).vectors * z;
    EXPECT_LT(rel_diff(energy_closed_form(z, q), oracle_concurrence_sq(psi, 2, 2)), 1e-12);
  }
}

TEST(DetM, Examples) {
  Rng rng(62);
  const double p = 0.7;
  const ComplexMatrix omega = random_hermitian(4, rng);
  EXPECT_LT(rel_diff(det_m(0.0, omega, p), cplx(std::norm(omega.determinant()))), 1e-12);
  const cplx s(0.3, -0.8);
  const double deth = h_matrix(p).diagonal().real().prod();
  EXPECT_LT(rel_diff(det_m(s, h_matrix(p), p), cplx(deth * deth * std::pow(4 * std::norm(s) + 1, 4))), 1e-12);
  EXPECT_THROW(det_m(s, ComplexMatrix::Identity(3, 3), p), ValidationError);
  EXPECT_THROW(det_m(s, omega, 0.0), ValidationError);
}

TEST(DetM, FactorizationMatchesBruteForce) {
  Rng rng(63);
  for (int k = 0; k < 100; ++k) {
    const double p = uniform(rng, 0.05, 1.0);
    const cplx s(uniform(rng, -2, 2), uniform(rng, -2, 2));
    const ComplexMatrix omega = ginibre(4, 4, rng);
    const cplx direct = oracle_det(m_matrix(s, omega, p));
    EXPECT_LT(rel_diff(det_m(s, omega, p), direct), 1e-10);
    EXPECT_LT(rel_diff(det_m_factored(s, omega, p), direct), 1e-10);
  }
}

TEST(LogZ1, GaussianLimit) {
  Rng rng(64);
  for (int k = 0; k < 20; ++k) {
    const double p = uniform(rng, 0.1, 1.0);
    const OmegaPrime op{log_uniform(rng, 0.1, 10), log_uniform(rng, 0.1, 10)};
    // omega = h^1/2 omega' h^1/2: tr omega = tr(omega' h), det omega = det omega' det h.
    const double h1 = (4 - 3 * p) / 8, h2 = p / 8;
    const double tr = op.gamma * h1 + 3 * op.lambda * h2;
    const double det = op.gamma * std::pow(op.lambda, 3) * h1 * std::pow(h2, 3);
    const double closed = 4 * std::log(kPi) + tr - std::log(det);
    EXPECT_LT(std::abs(log_z1_quadrature(1e-6, op, p) - closed), 1e-4 * std::abs(closed));
  }
}

TEST(LogZ1, DecreasingInBeta) {
  const OmegaPrime op{1.5, 4.0};
  double prev = log_z1_quadrature(1e-3, op, 0.9);
  for (int k = 1; k <= 30; ++k) {
    const double b = std::pow(10.0, -3 + 0.25 * k);
    const double cur = log_z1_quadrature(b, op, 0.9);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(LogZ1, InvalidArguments) {
  EXPECT_THROW(log_z1_quadrature(0.0, {1, 1}, 0.5), ValidationError);
  EXPECT_THROW(log_z1_quadrature(1.0, {-1, 1}, 0.5), ValidationError);
  EXPECT_THROW(log_z1_quadrature(1.0, {1, 1}, 0.0), ValidationError);
}

TEST(GradLogZ1, MatchesFiniteDifferences) {
  Rng rng(65);
  for (int k = 0; k < 50; ++k) {
    const double b = log_uniform(rng, 0.1, 1e4);
    const double p = uniform(rng, 0.2, 1.0);
    const OmegaPrime op{log_uniform(rng, 0.05, 20), log_uniform(rng, 0.05, 20)};
    const Residuals r = grad_log_z1(b, op, p);
    const double dg = richardson_derivative(
        [&](double g) { return log_z1_quadrature(b, {g, op.lambda}, p); }, op.gamma, 1e-3 * op.gamma);
    const double dl = richardson_derivative(
        [&](double l) { return log_z1_quadrature(b, {op.gamma, l}, p); }, op.lambda, 1e-3 * op.lambda);
    EXPECT_LT(rel_diff(r.res_gamma, dg), 1e-6) << "b=" << b << " p=" << p << " g=" << op.gamma;
    EXPECT_LT(rel_diff(3 * r.res_lambda, dl), 1e-6) << "b=" << b << " p=" << p << " l=" << op.lambda;
  }
}

TEST(GradLogZ1, SmallBetaZeroAtInverseH) {
  const double p = 0.6;
  const Residuals r = grad_log_z1(1e-9, {8 / (4 - 3 * p), 8 / p}, p);
  EXPECT_LT(r.norm(), 1e-7);
  EXPECT_GT(grad_log_z1(1e-9, {1.0, 1.0}, p).norm(), 1e-2);
}

TEST(GradLogZ1, SymmetricAtPOne) {
  const Residuals r = grad_log_z1(3.0, {2.5, 2.5}, 1.0);
  EXPECT_NEAR(r.res_gamma, r.res_lambda, 1e-14);
}

TEST(AvgEnergy, MatchesBetaFiniteDifference) {
  Rng rng(66);
  for (int k = 0; k < 20; ++k) {
    const double b = log_uniform(rng, 1.0, 1e5);
    const double p = uniform(rng, 0.3, 1.0);
    const OmegaPrime op{log_uniform(rng, 0.1, 10), log_uniform(rng, 0.1, 10)};
    const double fd = -richardson_derivative([&](double x) { return log_z1_quadrature(x, op, p); }, b, 1e-3 * b);
    EXPECT_LT(rel_diff(avg_energy_quadrature(b, op, p), fd), 1e-6);
  }
}

TEST(GeneralOmega, ReducesToDiagonalAndMatchesFiniteDifferences) {
  const double b = 50.0, p = 0.8;
  const OmegaPrime op{1.3, 3.1};
  ComplexMatrix diag = ComplexMatrix::Zero(4, 4);
  diag.diagonal() << op.gamma, op.lambda, op.lambda, op.lambda;
  const GeneralZ1 g = z1_general(b, diag, p);
  const Residuals r = grad_log_z1(b, op, p);
  EXPECT_NEAR(g.log_z1, log_z1_quadrature(b, op, p), 1e-11);
  EXPECT_NEAR(g.gradient(0, 0).real(), r.res_gamma, 1e-11);
  for (int a = 1; a < 4; ++a) EXPECT_NEAR(g.gradient(a, a).real(), r.res_lambda, 1e-11);

  // Directional derivative along a real symmetric perturbation.
  Rng rng(67);
  const ComplexMatrix base = diag + 0.2 * ComplexMatrix(random_hermitian(4, rng).real().cast<cplx>());
  Eigen::MatrixXd dir = Eigen::MatrixXd::Random(4, 4);
  dir = 0.5 * (dir + dir.transpose()).eval();
  const ComplexMatrix d = dir.cast<cplx>();
  const GeneralZ1 at = z1_general(b, base, p);
  const double fd = richardson_derivative([&](double t) { return z1_general(b, base + t * d, p).log_z1; }, 0.0, 1e-3);
  EXPECT_LT(rel_diff((at.gradient * d).trace().real(), fd), 1e-6);
}

TEST(GeneralOmega, DiagonalSaddleIsStationary) {
  const SaddleResult s = saddle_search(10.0, 0.95, 1e-12, 16, 2);
  ASSERT_LT(s.residual_norm, 1e-8);
  ComplexMatrix diag = ComplexMatrix::Zero(4, 4);
  diag.diagonal() << s.gamma_star, s.lambda_star, s.lambda_star, s.lambda_star;
  EXPECT_LT(z1_general(kHsBetaScale * 10.0, diag, 0.95).gradient.norm(), 1e-7);
}

TEST(Z1Quadrature, AgreesWithMonteCarlo) {
  // beta_hs = 1 on the quadrature side is beta = 1/2 for the energy c^2, and
  // omega = h^1/2 omega' h^1/2.
  const double p = 0.9, b = 1.0;
  const OmegaPrime op{2.0, 2.0};
  const RealVector sq = h_matrix(p).diagonal().real().cwiseSqrt();
  ComplexMatrix omega = ComplexMatrix::Zero(4, 4);
  omega.diagonal() << op.gamma * sq(0) * sq(0), op.lambda * sq(1) * sq(1), op.lambda * sq(2) * sq(2),
      op.lambda * sq(3) * sq(3);
  // The weights are heavy tailed, so pool independent runs rather than trusting one error bar.
  const CostOperator cop = cost_operator(werner_eigenensemble(p));
  const int runs = 8;
  double mean = 0, var = 0;
  for (int k = 0; k < runs; ++k) {
    const Z1Estimate mc = z1_mc(cop, b / 2, LagrangeMultipliers(omega), 400000, 68 + k);
    mean += mc.z1 / runs;
    var += mc.z1_std_error * mc.z1_std_error / (runs * runs);
  }
  const double quad = std::exp(log_z1_quadrature(b, op, p));
  EXPECT_LT(std::abs(mean - quad), 3 * std::sqrt(var)) << mean << " vs " << quad << " se " << std::sqrt(var);
}

TEST(SaddleSearch, Examples) {
  const SaddleResult s1 = saddle_search(10, 1.0, 1e-10, 16, 1);
  EXPECT_LT(s1.residual_norm, 1e-6);
  EXPECT_TRUE(s1.interior);
  const SaddleResult s9 = saddle_search(10, 0.9, 1e-10, 16, 1);
  EXPECT_LT(s9.residual_norm, 1e-6);
  const SaddleResult s5 = saddle_search(10, 0.5, 1e-10, 16, 1);
  EXPECT_GT(s5.residual_norm, 1e-3);
  EXPECT_THROW(saddle_search(0.0, 0.5), ValidationError);
}

TEST(EquipartitionScan, OnsetRule) {
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5};
  EXPECT_EQ(region_onset(grid, {1, 0, 1, 0, 0}, 0.5), 0.4);
  EXPECT_FALSE(region_onset(grid, {0, 0, 0, 0, 1}, 0.5).has_value());
  EXPECT_EQ(region_onset(grid, {0, 0, 0, 0, 0}, 0.5), 0.1);
}

TEST(EquipartitionScan, ReproducibleAndOrdered) {
  const std::vector<double> grid = p_grid(0.86, 0.01, 0.92);
  ASSERT_EQ(grid.size(), 7u);
  const EquipartitionScan a = equipartition_scan(grid, 10.0, 1e-6, 3);
  const EquipartitionScan b = equipartition_scan(grid, 10.0, 1e-6, 3, 2);
  EXPECT_EQ(a.residuals, b.residuals);
  ASSERT_TRUE(a.region_start.has_value());
  EXPECT_NEAR(*a.region_start, 0.89, 0.02);
  EXPECT_THROW(equipartition_scan({}, 10.0), ValidationError);
  EXPECT_THROW(equipartition_scan({0.0, 0.5}, 10.0), ValidationError);
}

TEST(AvgEnergyWerner, ScalesAsInverseBetaInRegion) {
  std::vector<double> eb;
  for (double beta : {10.0, 100.0, 1000.0}) eb.push_back(avg_energy_werner(beta, 0.95, 1) * beta);
  const double mean = (eb[0] + eb[1] + eb[2]) / 3;
  double var = 0;
  for (double v : eb) var += (v - mean) * (v - mean);
  EXPECT_LT(std::sqrt(var / 3) / mean, 0.1);
  EXPECT_THROW(avg_energy_werner(10.0, 0.5, 1), InfeasibleError);
}

TEST(AvgEnergyWerner, MatchesFiniteDifferenceAtSaddle) {
  Rng rng(69);
  for (int k = 0; k < 5; ++k) {
    const double beta = log_uniform(rng, 10, 1e3), p = uniform(rng, 0.9, 1.0);
    const WernerEnergy w = avg_energy_werner_detail(beta, p, k);
    const OmegaPrime op{w.saddle.gamma_star, w.saddle.lambda_star};
    const double fd =
        -richardson_derivative([&](double x) { return log_z1_quadrature(kHsBetaScale * x, op, p); }, beta, 1e-3 * beta);
    EXPECT_LT(rel_diff(w.avg_energy, fd), 1e-6);
  }
}
