#pragma once

// Closed-form 2 (x) 2 pipeline for Werner and Bell-diagonal states.
//
// Werner states W(p) = (1 - p)|Psi-><Psi-| + (p/4) 1 use the eigenensemble
//   e1 = sqrt(1 - 3p/4) Psi-, e2 = (sqrt(p)/2) i Psi+, e3 = (sqrt(p)/2) i Phi-,
//   e4 = (sqrt(p)/2) Phi+,
// for which the single h matrix is h(p) = diag(4 - 3p, p, p, p) / 8 and the
// one-particle energy is |(4 - 3p) z1^2 + p (z2^2 + z3^2 + z4^2)|^2 / 32.
//
// Two inverse temperatures appear below.
//  * The pipeline beta (saddle_search, equipartition_scan, avg_energy_werner)
//    is conjugate to P(z) = |(4 - 3p) z1^2 + p (z2^2 + z3^2 + z4^2)|^2, and
//    avg_energy_werner returns <<P>>.
//  * The Hubbard-Stratonovich beta used by log_z1_quadrature and grad_log_z1
//    is beta_hs = kHsBetaScale * beta; the Gaussian weight there is
//    exp(-x / (4 beta_hs)).

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sepstat/concurrence.hpp"
#include "sepstat/costfn.hpp"
#include "sepstat/minimize.hpp"
#include "sepstat/quadrature.hpp"
#include "sepstat/statmech.hpp"

namespace sepstat::werner {

inline constexpr double kHsBetaScale = 64.0;
inline constexpr double kClosedFormPrefactor = 1.0 / 32.0;
inline constexpr double kInteriorMargin = 1e-3;
inline constexpr double kLogParamBound = 35.0;
inline constexpr double kDefaultThreshold = 1e-6;

inline const Dims kQubits{2, 2};

inline void check_p(double p, bool allow_zero) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("Werner parameter p must lie in [0, 1], got " + std::to_string(p));
  if (!allow_zero && p == 0.0) throw ValidationError("Werner pipeline needs p > 0 (p = 0 is a pure state)");
}

// Bell basis on |00>, |01>, |10>, |11>.
inline ComplexVector psi_minus() { return ComplexVector{{0, M_SQRT1_2, -M_SQRT1_2, 0}}; }
inline ComplexVector psi_plus() { return ComplexVector{{0, M_SQRT1_2, M_SQRT1_2, 0}}; }
inline ComplexVector phi_minus() { return ComplexVector{{M_SQRT1_2, 0, 0, -M_SQRT1_2}}; }
inline ComplexVector phi_plus() { return ComplexVector{{M_SQRT1_2, 0, 0, M_SQRT1_2}}; }

inline DensityMatrix werner_state(double p) {
  check_p(p, true);
  const ComplexVector s = psi_minus();
  ComplexMatrix rho = (1.0 - p) * (s * s.adjoint()) + (p / 4.0) * ComplexMatrix::Identity(4, 4);
  return {kQubits, rho};
}

struct BellWeights {
  double q0 = 1, q1 = 0, q2 = 0, q3 = 0;  // weights of Psi-, Psi+, Phi-, Phi+
};

inline void check_simplex(const BellWeights& q) {
  for (double v : {q.q0, q.q1, q.q2, q.q3})
    if (!(v >= 0)) throw ValidationError("Bell-diagonal weights must be non-negative");
  if (std::abs(q.q0 + q.q1 + q.q2 + q.q3 - 1.0) > 1e-12) throw ValidationError("Bell-diagonal weights must sum to 1");
}

inline DensityMatrix bell_diagonal_state(const BellWeights& q) {
  check_simplex(q);
  ComplexMatrix rho = q.q0 * psi_minus() * psi_minus().adjoint() + q.q1 * psi_plus() * psi_plus().adjoint() +
                      q.q2 * phi_minus() * phi_minus().adjoint() + q.q3 * phi_plus() * phi_plus().adjoint();
  return {kQubits, rho};
}

/// sqrt(q0) Psi-, sqrt(q1) i Psi+, sqrt(q2) i Phi-, sqrt(q3) Phi+. Zero weights
/// keep their (zero) column.
inline EigenEnsemble bell_diagonal_ensemble(const BellWeights& q) {
  check_simplex(q);
  const cplx I(0.0, 1.0);
  EigenEnsemble ens;
  ens.dims = kQubits;
  ens.vectors.resize(4, 4);
  ens.vectors.col(0) = std::sqrt(q.q0) * psi_minus();
  ens.vectors.col(1) = std::sqrt(q.q1) * I * psi_plus();
  ens.vectors.col(2) = std::sqrt(q.q2) * I * phi_minus();
  ens.vectors.col(3) = std::sqrt(q.q3) * phi_plus();
  ens.eigenvalues = RealVector{{q.q0, q.q1, q.q2, q.q3}};
  return ens;
}

inline BellWeights werner_weights(double p) { return {1.0 - 0.75 * p, p / 4.0, p / 4.0, p / 4.0}; }

inline EigenEnsemble werner_eigenensemble(double p) {
  check_p(p, false);
  return bell_diagonal_ensemble(werner_weights(p));
}

/// The single h matrix (d1 = d2 = 1) of the Bell-diagonal ensemble, computed
/// from the skew bases.
inline ComplexMatrix bell_diagonal_h(const BellWeights& q) { return h_matrices(bell_diagonal_ensemble(q)).at(0, 0); }

/// diag(4 - 3p, p, p, p) / 8.
inline ComplexMatrix h_matrix(double p) {
  check_p(p, true);
  ComplexMatrix h = ComplexMatrix::Zero(4, 4);
  h.diagonal() << (4.0 - 3.0 * p) / 8.0, p / 8.0, p / 8.0, p / 8.0;
  return h;
}

/// |(4 - 3p) z1^2 + p (z2^2 + z3^2 + z4^2)|^2 / 32 = c^2(sum_a z_a e_a).
inline double energy_closed_form(const ComplexVector& z, double p) {
  check_p(p, false);
  if (z.size() != 4) throw ValidationError("energy_closed_form: z must have 4 components");
  const cplx q = (4.0 - 3.0 * p) * z(0) * z(0) + p * (z(1) * z(1) + z(2) * z(2) + z(3) * z(3));
  return kClosedFormPrefactor * std::norm(q);
}

// ---------------------------------------------------------------------------
// The 2r x 2r matrix M and its determinant

/// M = [[omega, -2i s h], [-2i conj(s) h, conj(omega)]].
inline ComplexMatrix m_matrix(cplx s, const ComplexMatrix& omega, double p) {
  if (omega.rows() != 4 || omega.cols() != 4) throw ValidationError("det_m: omega must be 4x4");
  const ComplexMatrix h = h_matrix(p);
  const cplx I(0.0, 1.0);
  ComplexMatrix m(8, 8);
  m.topLeftCorner(4, 4) = omega;
  m.topRightCorner(4, 4) = -2.0 * I * s * h;
  m.bottomLeftCorner(4, 4) = -2.0 * I * std::conj(s) * h;
  m.bottomRightCorner(4, 4) = omega.conjugate();
  return m;
}

inline cplx det_m(cplx s, const ComplexMatrix& omega, double p) {
  check_p(p, false);
  return m_matrix(s, omega, p).determinant();
}

/// omega' = h^{-1/2} omega h^{-1/2}.
inline ComplexMatrix omega_prime(const ComplexMatrix& omega, double p) {
  check_p(p, false);
  const RealVector d = h_matrix(p).diagonal().real().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * omega * d.asDiagonal();
}

/// det h^2 det(4|s|^2 + omega' conj(omega')).
inline cplx det_m_factored(cplx s, const ComplexMatrix& omega, double p) {
  const ComplexMatrix op = omega_prime(omega, p);
  const double deth = h_matrix(p).diagonal().real().prod();
  const ComplexMatrix k = 4.0 * std::norm(s) * ComplexMatrix::Identity(4, 4) + op * op.conjugate();
  return deth * deth * k.determinant();
}

// ---------------------------------------------------------------------------
// Quadrature for Z_1 on the restricted omega' = diag(gamma, lambda, lambda, lambda)

struct OmegaPrime {
  double gamma = 1.0;
  double lambda = 1.0;
};

struct Z1Moments {
  double log_integral = 0.0;  // ln int_0^inf exp(-x/4b) (x+g^2)^-1/2 (x+l^2)^-3/2 dx
  double mean_gamma = 0.0;    // <gamma / (x + gamma^2)>
  double mean_lambda = 0.0;   // <lambda / (x + lambda^2)>
  double mean_x = 0.0;        // <x>
  int panels = 0;
};

inline void check_quadrature_args(double beta_hs, const OmegaPrime& op, double p) {
  if (!(beta_hs > 0) || !std::isfinite(beta_hs)) throw ValidationError("beta must be positive and finite");
  if (!(op.gamma > 0) || !(op.lambda > 0) || !std::isfinite(op.gamma) || !std::isfinite(op.lambda))
    throw ValidationError("omega' parameters must be positive and finite");
  check_p(p, false);
}

inline Z1Moments z1_moments(double beta_hs, const OmegaPrime& op, double p, const quad::Options& qopt = {}) {
  check_quadrature_args(beta_hs, op, p);
  const double g = op.gamma, l = op.lambda, g2 = g * g, l2 = l * l;
  const double c = 4.0 * beta_hs;
  const double shift = -std::log(g) - 3.0 * std::log(l);  // log of the weight at x = 0
  const quad::VectorIntegrand f = [=](double x, Eigen::Ref<RealVector> out) {
    const double w = std::exp(-x / c - 0.5 * std::log(x + g2) - 1.5 * std::log(x + l2) - shift);
    out(0) = w;
    out(1) = w * g / (x + g2);
    out(2) = w * l / (x + l2);
    out(3) = w * x;
  };
  const quad::Result r = quad::integrate_half_line(f, 4, c, {g2, l2}, qopt);
  Z1Moments m;
  m.log_integral = std::log(r.value(0)) + shift;
  m.mean_gamma = r.value(1) / r.value(0);
  m.mean_lambda = r.value(2) / r.value(0);
  m.mean_x = r.value(3) / r.value(0);
  m.panels = r.panels;
  return m;
}

inline double log_z1_from_moments(double beta_hs, const OmegaPrime& op, double p, const Z1Moments& m) {
  const double h1 = (4.0 - 3.0 * p) / 8.0, h2 = p / 8.0;
  const double log_det_h = std::log(h1) + 3.0 * std::log(h2);
  const double tr = op.gamma * h1 + 3.0 * op.lambda * h2;
  return 4.0 * std::log(kPi) - std::log(4.0 * beta_hs) - log_det_h + tr + m.log_integral;
}

/// ln Z_1 = ln[pi^4 / (4 b det h)] + tr(omega' h)
///        + ln int_0^inf exp(-x/4b) / sqrt(det(x + omega' conj(omega'))) dx,  b = beta_hs.
inline double log_z1_quadrature(double beta_hs, const OmegaPrime& op, double p) {
  return log_z1_from_moments(beta_hs, op, p, z1_moments(beta_hs, op, p));
}

struct Residuals {
  double res_gamma = 0.0;
  double res_lambda = 0.0;

  /// Hilbert-Schmidt norm of the full diagonal gradient (lambda appears 3 times).
  [[nodiscard]] double norm() const { return std::sqrt(res_gamma * res_gamma + 3.0 * res_lambda * res_lambda); }
};

inline Residuals residuals_from_moments(double p, const Z1Moments& m) {
  return {(4.0 - 3.0 * p) / 8.0 - m.mean_gamma, p / 8.0 - m.mean_lambda};
}

/// d ln Z_1 / d omega' = h - <(x + omega' conj(omega'))^-1 omega'>, per
/// diagonal block: d/dgamma = res_gamma and d/dlambda = 3 res_lambda.
inline Residuals grad_log_z1(double beta_hs, const OmegaPrime& op, double p) {
  return residuals_from_moments(p, z1_moments(beta_hs, op, p));
}

/// -d ln Z_1 / d beta_hs at fixed omega' = 1/b - <x> / (4 b^2).
inline double avg_energy_quadrature(double beta_hs, const OmegaPrime& op, double p) {
  const Z1Moments m = z1_moments(beta_hs, op, p);
  return 1.0 / beta_hs - m.mean_x / (4.0 * beta_hs * beta_hs);
}

// General Hermitian omega' (4 x 4, positive definite).

struct GeneralZ1 {
  double log_z1 = 0.0;
  ComplexMatrix gradient;  // h - <(x + omega' conj(omega'))^-1 omega'>
};

inline GeneralZ1 z1_general(double beta_hs, const ComplexMatrix& omega_p, double p) {
  check_p(p, false);
  if (!(beta_hs > 0)) throw ValidationError("beta must be positive");
  if (omega_p.rows() != 4 || omega_p.cols() != 4) throw ValidationError("omega' must be 4x4");
  if (!LagrangeMultipliers(omega_p).is_positive_definite()) throw ValidationError("omega' must be positive definite");

  const ComplexMatrix oo = omega_p * omega_p.conjugate();
  const Eigen::ComplexEigenSolver<ComplexMatrix> es(oo, false);
  std::vector<double> breaks;
  for (int k = 0; k < 4; ++k) breaks.push_back(std::max(std::abs(es.eigenvalues()(k)), 1e-300));
  const double shift = -0.5 * std::log(oo.determinant().real());
  const double c = 4.0 * beta_hs;
  const quad::VectorIntegrand f = [&](double x, Eigen::Ref<RealVector> out) {
    const ComplexMatrix k = x * ComplexMatrix::Identity(4, 4) + oo;
    const Eigen::PartialPivLU<ComplexMatrix> lu(k);
    const double w = std::exp(-x / c - 0.5 * std::log(lu.determinant().real()) - shift);
    const ComplexMatrix a = lu.solve(omega_p);
    out(0) = w;
    for (int i = 0; i < 16; ++i) {
      out(1 + 2 * i) = w * a(i / 4, i % 4).real();
      out(2 + 2 * i) = w * a(i / 4, i % 4).imag();
    }
  };
  const quad::Result r = quad::integrate_half_line(f, 33, c, breaks);
  const ComplexMatrix h = h_matrix(p);
  GeneralZ1 out;
  const double log_det_h = std::log(h.diagonal().real().prod());
  out.log_z1 = 4.0 * std::log(kPi) - std::log(c) - log_det_h + (omega_p * h).trace().real() + std::log(r.value(0)) +
               shift;
  out.gradient = h;
  for (int i = 0; i < 16; ++i) out.gradient(i / 4, i % 4) -= cplx(r.value(1 + 2 * i), r.value(2 + 2 * i)) / r.value(0);
  return out;
}

// ---------------------------------------------------------------------------
// Saddle search and the equipartition region

struct SaddleResult {
  double gamma_star = 0.0;
  double lambda_star = 0.0;
  double residual_norm = 0.0;
  bool interior = false;
  int iterations = 0;
};

namespace detail {

inline OmegaPrime from_log(const RealVector& u) {
  return {std::exp(std::clamp(u(0), -kLogParamBound, kLogParamBound)),
          std::exp(std::clamp(u(1), -kLogParamBound, kLogParamBound))};
}

inline std::optional<Residuals> safe_residuals(double beta_hs, const RealVector& u, double p) {
  try {
    return grad_log_z1(beta_hs, from_log(u), p);
  } catch (const ConvergenceError&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Minimizes res_gamma^2 + 3 res_lambda^2 over (gamma, lambda) in (0, inf)^2,
/// parametrized by their logarithms. The first start is the beta -> 0 saddle
/// omega' = h^-1; the others are log-uniform in [1e-2, 1e2]^2. Each start runs
/// Nelder-Mead followed by a Levenberg-Marquardt polish. Restarts stop early
/// once the residual norm is below `tol`.
inline SaddleResult saddle_search(double beta, double p, double tol = 1e-10, int restarts = 16,
                                  std::uint64_t seed = 0) {
  if (!(beta > 0) || !std::isfinite(beta)) throw ValidationError("saddle_search: beta must be positive");
  check_p(p, false);
  if (restarts < 1) throw ValidationError("saddle_search: need at least one start");
  const double b = kHsBetaScale * beta;

  const auto objective = [&](const RealVector& u) {
    const auto r = detail::safe_residuals(b, u, p);
    if (!r) return std::numeric_limits<double>::infinity();
    return r->norm() * r->norm();
  };
  const auto residual_vec = [&](const RealVector& u) {
    const auto r = detail::safe_residuals(b, u, p);
    if (!r) return RealVector(RealVector::Constant(2, std::numeric_limits<double>::quiet_NaN()));
    return RealVector(RealVector{{r->res_gamma, std::sqrt(3.0) * r->res_lambda}});
  };

  Rng rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> unif(std::log(1e-2), std::log(1e2));

  SaddleResult best;
  best.residual_norm = std::numeric_limits<double>::infinity();
  for (int k = 0; k < restarts; ++k) {
    RealVector u0(2);
    if (k == 0) {
      u0 << std::log(8.0 / (4.0 - 3.0 * p)), std::log(8.0 / p);
    } else {
      u0(0) = unif(rng);
      u0(1) = unif(rng);
    }
    opt::Minimum nm = opt::nelder_mead(objective, u0, {.initial_step = 0.5, .x_tol = 1e-9, .f_tol = 1e-30,
                                                       .max_iterations = 600});
    nm.x = nm.x.cwiseMax(-kLogParamBound).cwiseMin(kLogParamBound);
    const opt::Minimum lm = opt::levenberg_marquardt(residual_vec, nm.x);
    const opt::Minimum& pick = std::isfinite(lm.value) && lm.value <= nm.value ? lm : nm;
    const double norm = std::sqrt(pick.value);
    if (norm < best.residual_norm) {
      const OmegaPrime op = detail::from_log(pick.x);
      best.gamma_star = op.gamma;
      best.lambda_star = op.lambda;
      best.residual_norm = norm;
      best.interior = op.gamma > kInteriorMargin && op.lambda > kInteriorMargin;
    }
    best.iterations += nm.iterations + lm.iterations;
    if (best.residual_norm <= tol) break;
  }
  return best;
}

struct EquipartitionScan {
  std::vector<double> p_grid;
  std::vector<double> residuals;
  std::vector<SaddleResult> saddles;
  double threshold = kDefaultThreshold;
  std::optional<double> region_start;
};

/// {a, a + step, ..., b}, each point computed as a + k * step.
inline std::vector<double> p_grid(double a, double step, double b) {
  if (!(step > 0) || !(b >= a)) throw ValidationError("p grid: need step > 0 and b >= a");
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t k = 0; k < count; ++k) grid[k] = a + static_cast<double>(k) * step;
  return grid;
}

/// Smallest grid p from which every larger grid p has residual < threshold.
inline std::optional<double> region_onset(const std::vector<double>& grid, const std::vector<double>& residuals,
                                          double threshold) {
  std::optional<double> start;
  for (std::size_t k = grid.size(); k-- > 0;) {
    if (!(residuals[k] < threshold)) break;
    start = grid[k];
  }
  return start;
}

inline EquipartitionScan equipartition_scan(const std::vector<double>& grid, double beta,
                                            double threshold = kDefaultThreshold, std::uint64_t seed = 0,
                                            int threads = 1) {
  if (grid.empty()) throw ValidationError("equipartition_scan: empty p grid");
  for (double p : grid)
    if (!(p > 0 && p <= 1)) throw ValidationError("equipartition_scan: grid must lie in (0, 1]");
  if (!std::is_sorted(grid.begin(), grid.end())) throw ValidationError("equipartition_scan: grid must be ascending");
  if (!(threshold > 0)) throw ValidationError("equipartition_scan: threshold must be positive");

  EquipartitionScan scan;
  scan.p_grid = grid;
  scan.threshold = threshold;
  scan.saddles.resize(grid.size());
  sepstat::detail::for_each_block(static_cast<int>(grid.size()), threads, [&](int k) {
    scan.saddles[k] = saddle_search(beta, grid[k], 1e-3 * threshold, 16, derive_seed(seed, static_cast<std::uint64_t>(k)));
  });
  for (const auto& s : scan.saddles) scan.residuals.push_back(s.residual_norm);
  scan.region_start = region_onset(scan.p_grid, scan.residuals, threshold);
  return scan;
}

struct WernerEnergy {
  double avg_energy = 0.0;  // <<P>> at the pipeline beta
  SaddleResult saddle;
};

/// <<P>> = -d ln Z_1 / d beta at the saddle omega'(beta); equals
/// kHsBetaScale * (1/b - <x>/(4 b^2)) with b = kHsBetaScale * beta.
/// Throws InfeasibleError when no saddle with residual below `threshold` exists.
inline WernerEnergy avg_energy_werner_detail(double beta, double p, std::uint64_t seed = 0,
                                             double threshold = kDefaultThreshold) {
  const SaddleResult s = saddle_search(beta, p, 1e-3 * threshold, 16, seed);
  if (!(s.residual_norm < threshold))
    throw InfeasibleError("constraints unsatisfiable at p = " + std::to_string(p) + " (residual " +
                          std::to_string(s.residual_norm) + ")");
  const double b = kHsBetaScale * beta;
  return {kHsBetaScale * avg_energy_quadrature(b, {s.gamma_star, s.lambda_star}, p), s};
}

inline double avg_energy_werner(double beta, double p, std::uint64_t seed = 0, double threshold = kDefaultThreshold) {
  return avg_energy_werner_detail(beta, p, seed, threshold).avg_energy;
}

}  // namespace sepstat::werner
