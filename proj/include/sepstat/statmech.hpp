#pragma once

// Statistical layer over the cost function.
//
// * Haar sampling of V_{N,r} with reweighting to exp(-beta E) (the constrained
//   canonical average), state-density histograms and scaling fits.
// * A Metropolis sampler of the same canonical distribution for the large-beta
//   regime, where reweighting a fixed Haar sample runs out of effective samples.
// * The one-particle Gaussian ensemble exp(-beta E_1(z) - <z|omega z>) sampled
//   against its Gaussian factor.
//
// Every stochastic routine splits its work into kJackknifeBlocks blocks with
// independent RNG streams derive_seed(seed, block); results are reduced in
// block order, so they do not depend on the thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "sepstat/costfn.hpp"

namespace sepstat {

inline constexpr int kJackknifeBlocks = 32;

struct McEstimate {
  double beta = 0.0;
  std::size_t samples = 0;
  double mean_energy = 0.0;
  double std_error = 0.0;
  double min_energy_seen = 0.0;
  double effective_sample_size = 0.0;
};

/// Energies of Haar-distributed ensembles, grouped in contiguous blocks.
struct EnergySample {
  std::vector<double> energies;
  std::vector<std::size_t> block_offsets;  // blocks + 1 entries

  [[nodiscard]] int blocks() const { return static_cast<int>(block_offsets.size()) - 1; }
  [[nodiscard]] double min() const { return *std::min_element(energies.begin(), energies.end()); }
};

namespace detail {

inline std::vector<std::size_t> block_offsets(std::size_t samples, int blocks) {
  std::vector<std::size_t> off(blocks + 1);
  for (int b = 0; b <= blocks; ++b) off[b] = samples * static_cast<std::size_t>(b) / blocks;
  return off;
}

/// Runs body(block) for every block, spread over `threads` workers.
template <class Body>
void for_each_block(int blocks, int threads, Body&& body) {
  threads = std::clamp(threads, 1, blocks);
  if (threads == 1) {
    for (int b = 0; b < blocks; ++b) body(b);
    return;
  }
  std::vector<std::jthread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int b = t; b < blocks; b += threads) body(b);
    });
}

/// Delete-one-block jackknife standard error of a statistic given its
/// leave-one-out values.
inline double jackknife_error(std::span<const double> loo) {
  const auto nb = static_cast<double>(loo.size());
  if (loo.size() < 2) return 0.0;
  const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / nb;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return std::sqrt((nb - 1.0) / nb * ss);
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LinearFit least_squares_line(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return fit;
}

}  // namespace detail

inline EnergySample sample_haar_energies(const CostOperator& cop, int N, std::size_t samples, std::uint64_t seed,
                                         int threads = 1) {
  if (N < cop.rank()) throw ValidationError("sample_haar_energies: need N >= rank");
  if (samples < 1) throw ValidationError("sample_haar_energies: need at least one sample");
  const int blocks = static_cast<int>(std::min<std::size_t>(kJackknifeBlocks, samples));
  EnergySample out;
  out.block_offsets = detail::block_offsets(samples, blocks);
  out.energies.resize(samples);
  detail::for_each_block(blocks, threads, [&](int b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    for (std::size_t k = out.block_offsets[b]; k < out.block_offsets[b + 1]; ++k) {
      const StiefelPoint z = haar_stiefel(N, cop.rank(), rng);
      out.energies[k] = energy_via_h(z.matrix(), cop.hset());
    }
  });
  return out;
}

/// <<E>>_beta = sum E_k exp(-beta E_k) / sum exp(-beta E_k) over the sample,
/// with a block-jackknife error and Kish effective sample size.
inline McEstimate reweight(const EnergySample& sample, double beta) {
  if (!(beta >= 0)) throw ValidationError("reweight: beta must be >= 0");
  const double emin = sample.min();
  const int blocks = sample.blocks();
  std::vector<double> s0(blocks, 0.0), s1(blocks, 0.0);
  double w2 = 0.0;
  for (int b = 0; b < blocks; ++b)
    for (std::size_t k = sample.block_offsets[b]; k < sample.block_offsets[b + 1]; ++k) {
      const double e = sample.energies[k];
      const double w = std::exp(-beta * (e - emin));
      s0[b] += w;
      s1[b] += w * e;
      w2 += w * w;
    }
  const double t0 = std::accumulate(s0.begin(), s0.end(), 0.0);
  const double t1 = std::accumulate(s1.begin(), s1.end(), 0.0);
  std::vector<double> loo(blocks);
  for (int b = 0; b < blocks; ++b) loo[b] = (t1 - s1[b]) / (t0 - s0[b]);

  McEstimate est;
  est.beta = beta;
  est.samples = sample.energies.size();
  est.mean_energy = t1 / t0;
  est.std_error = blocks > 1 ? detail::jackknife_error(loo) : 0.0;
  est.min_energy_seen = emin;
  est.effective_sample_size = std::min(t0 * t0 / w2, static_cast<double>(est.samples));
  return est;
}

inline McEstimate mc_average_energy(const CostOperator& cop, int N, double beta, std::size_t samples,
                                    std::uint64_t seed, int threads = 1) {
  return reweight(sample_haar_energies(cop, N, samples, seed, threads), beta);
}

/// Common-random-numbers curve: one Haar sample reweighted at every beta.
inline std::vector<McEstimate> mc_energy_curve(const CostOperator& cop, int N, std::span<const double> betas,
                                               std::size_t samples, std::uint64_t seed, int threads = 1) {
  const EnergySample sample = sample_haar_energies(cop, N, samples, seed, threads);
  std::vector<McEstimate> out;
  out.reserve(betas.size());
  for (double b : betas) out.push_back(reweight(sample, b));
  return out;
}

// ---------------------------------------------------------------------------
// State density

struct StateDensityEstimate {
  std::vector<double> bin_edges;
  std::vector<double> counts;  // normalized frequencies, sum = 1
  std::size_t total_samples = 0;

  [[nodiscard]] std::size_t bins() const { return counts.size(); }

  /// Geometric centre for bins with a positive lower edge, midpoint otherwise.
  [[nodiscard]] double center(std::size_t k) const {
    const double a = bin_edges[k], b = bin_edges[k + 1];
    return a > 0 ? std::sqrt(a * b) : 0.5 * (a + b);
  }

  /// Frequency per unit energy.
  [[nodiscard]] double density(std::size_t k) const { return counts[k] / (bin_edges[k + 1] - bin_edges[k]); }
};

/// Binning: [0, lo), then log-spaced bins up to split = split_fraction * max,
/// then linear bins up to the sampled maximum. lo = split * 10^-log_decades.
struct HistogramOptions {
  double log_decades = 4.0;
  double split_fraction = 0.1;
};

inline StateDensityEstimate histogram_from_samples(std::span<const double> energies, int bins,
                                                   const HistogramOptions& opt = {}) {
  if (bins < 2) throw ValidationError("histogram: need at least 2 bins");
  if (energies.empty()) throw ValidationError("histogram: no samples");
  const double emax = *std::max_element(energies.begin(), energies.end());
  if (!(emax > 0)) throw ValidationError("histogram: all energies are zero");
  if (*std::min_element(energies.begin(), energies.end()) < 0) throw ValidationError("histogram: negative energy");

  const double split = std::min(opt.split_fraction, 1.0) * emax;
  const bool all_log = opt.split_fraction >= 1.0;
  const int log_edges = all_log ? bins : bins / 2;
  const int lin_bins = bins - log_edges;
  const double lo = split * std::pow(10.0, -opt.log_decades);

  StateDensityEstimate h;
  h.bin_edges.push_back(0.0);
  for (int k = 0; k < log_edges; ++k) {
    const double f = log_edges == 1 ? 1.0 : static_cast<double>(k) / (log_edges - 1);
    h.bin_edges.push_back(lo * std::pow(split / lo, f));
  }
  for (int k = 1; k <= lin_bins; ++k) h.bin_edges.push_back(split + (emax - split) * k / lin_bins);
  h.bin_edges.back() = emax;

  h.counts.assign(bins, 0.0);
  for (double e : energies) {
    auto it = std::upper_bound(h.bin_edges.begin(), h.bin_edges.end(), e);
    auto k = static_cast<std::size_t>(std::distance(h.bin_edges.begin(), it)) - 1;
    h.counts[std::min<std::size_t>(k, bins - 1)] += 1.0;
  }
  h.total_samples = energies.size();
  for (double& c : h.counts) c /= static_cast<double>(h.total_samples);
  return h;
}

inline StateDensityEstimate estimate_state_density(const CostOperator& cop, int N, std::size_t samples, int bins,
                                                   std::uint64_t seed, const HistogramOptions& opt = {},
                                                   int threads = 1) {
  const EnergySample s = sample_haar_energies(cop, N, samples, seed, threads);
  return histogram_from_samples(s.energies, bins, opt);
}

// ---------------------------------------------------------------------------
// Scaling fits

struct ScalingFit {
  std::vector<double> log_beta;    // log of the abscissa (beta, or epsilon for densities)
  std::vector<double> log_energy;  // log of the ordinate
  double slope = 0.0;
  double intercept = 0.0;
  double delta = 0.0;
  double amplitude = 0.0;
  double r_squared = 0.0;
};

/// Fits rho(eps) = A eps^delta on the nonempty bins whose centres lie in
/// [window.first, window.second].
inline ScalingFit fit_power_law(const StateDensityEstimate& hist, std::pair<double, double> window) {
  ScalingFit fit;
  for (std::size_t k = 0; k < hist.bins(); ++k) {
    const double c = hist.center(k);
    if (hist.counts[k] > 0 && c > 0 && c >= window.first && c <= window.second) {
      fit.log_beta.push_back(std::log(c));
      fit.log_energy.push_back(std::log(hist.density(k)));
    }
  }
  if (fit.log_beta.size() < 3) throw ValidationError("fit_power_law: insufficient data (need >= 3 nonempty bins)");
  const auto line = detail::least_squares_line(fit.log_beta, fit.log_energy);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.delta = line.slope;
  fit.amplitude = std::exp(line.intercept);
  fit.r_squared = line.r_squared;
  return fit;
}

/// Fits <<E>> = A beta^slope; with slope -1 the power-law density gives
/// A = delta + 1, so delta = A - 1.
inline ScalingFit fit_energy_scaling(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw ValidationError("fit_energy_scaling: need at least 3 points");
  ScalingFit fit;
  for (const auto& [beta, e] : points) {
    if (!(beta > 0) || !(e > 0)) throw ValidationError("fit_energy_scaling: beta and energy must be positive");
    fit.log_beta.push_back(std::log(beta));
    fit.log_energy.push_back(std::log(e));
  }
  const auto line = detail::least_squares_line(fit.log_beta, fit.log_energy);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.amplitude = std::exp(line.intercept);
  fit.delta = fit.amplitude - 1.0;
  fit.r_squared = line.r_squared;
  return fit;
}

// ---------------------------------------------------------------------------
// Canonical sampling on V_{N,r}

struct AnnealOptions {
  int sweeps_per_beta = 3000;  // one sweep = N proposals
  int burn_in_sweeps = 1000;   // per beta, step size adapted only here
  double initial_step = 0.3;
  int reorthonormalize_every = 50;
};

struct CanonicalRun {
  std::vector<McEstimate> estimates;  // one per beta, in input order
  double min_energy_seen = std::numeric_limits<double>::infinity();
  ComplexMatrix best_point;  // z with the lowest energy visited
};

/// Metropolis chain targeting exp(-beta E(z)) with respect to the Haar
/// measure on V_{N,r}, annealed through `betas` (which must be ascending).
///
/// Proposals left-multiply two random rows of z by exp(i s H), H a random
/// 2x2 Hermitian matrix. They preserve z^dagger z = 1 and the Haar measure,
/// and H -> -H makes them symmetric.
inline CanonicalRun mc_canonical_energy(const CostOperator& cop, int N, std::span<const double> betas,
                                        std::uint64_t seed, const AnnealOptions& opt = {}) {
  if (betas.empty()) throw ValidationError("mc_canonical_energy: empty beta ladder");
  if (!std::is_sorted(betas.begin(), betas.end()) || betas.front() < 0)
    throw ValidationError("mc_canonical_energy: betas must be non-negative and ascending");
  if (opt.sweeps_per_beta <= opt.burn_in_sweeps) throw ValidationError("mc_canonical_energy: no measurement sweeps");
  const int r = cop.rank();
  if (N < 2 || N < r) throw ValidationError("mc_canonical_energy: need N >= max(2, rank)");

  Rng rng(derive_seed(seed, 0));
  ComplexMatrix z = haar_stiefel(N, r, rng).matrix();
  std::vector<double> rows(N);
  auto refresh = [&] {
    for (int i = 0; i < N; ++i) rows[i] = cop.row_energy(z.row(i).transpose());
  };
  refresh();

  std::uniform_int_distribution<int> pick(0, N - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double step = opt.initial_step;

  CanonicalRun run;
  run.best_point = z;
  auto current_total = [&] { return std::accumulate(rows.begin(), rows.end(), 0.0); };
  run.min_energy_seen = current_total();

  for (double beta : betas) {
    std::vector<double> trace;
    trace.reserve(opt.sweeps_per_beta - opt.burn_in_sweeps);
    std::size_t accepted = 0, proposed = 0;
    for (int sweep = 0; sweep < opt.sweeps_per_beta; ++sweep) {
      for (int move = 0; move < N; ++move) {
        const int i = pick(rng);
        int j = pick(rng);
        while (j == i) j = pick(rng);
        const double a0 = normal(rng), a1 = normal(rng), a2 = normal(rng), a3 = normal(rng);
        const double len = std::sqrt(a1 * a1 + a2 * a2 + a3 * a3);
        const double c = std::cos(step * len);
        const double s = len > 0 ? std::sin(step * len) / len : 0.0;
        const cplx ph = std::polar(1.0, step * a0);
        const cplx I(0.0, 1.0);
        // exp(i s (a1 X + a2 Y + a3 Z)) = c 1 + i sin (a.sigma)/|a|
        const cplx u00 = ph * (c + I * s * a3);
        const cplx u01 = ph * (I * s * cplx(a1, -a2));
        const cplx u10 = ph * (I * s * cplx(a1, a2));
        const cplx u11 = ph * (c - I * s * a3);
        const ComplexVector zi = z.row(i).transpose();
        const ComplexVector zj = z.row(j).transpose();
        const ComplexVector ni = u00 * zi + u01 * zj;
        const ComplexVector nj = u10 * zi + u11 * zj;
        const double ei = cop.row_energy(ni);
        const double ej = cop.row_energy(nj);
        const double de = ei + ej - rows[i] - rows[j];
        ++proposed;
        if (de <= 0 || unif(rng) < std::exp(-beta * de)) {
          z.row(i) = ni.transpose();
          z.row(j) = nj.transpose();
          rows[i] = ei;
          rows[j] = ej;
          ++accepted;
        }
      }
      if ((sweep + 1) % opt.reorthonormalize_every == 0) {
        z = gram_schmidt(z);
        refresh();
      }
      const double e = current_total();
      if (e < run.min_energy_seen) {
        run.min_energy_seen = e;
        run.best_point = z;
      }
      if (sweep < opt.burn_in_sweeps) {
        if ((sweep + 1) % 100 == 0) {
          const double rate = static_cast<double>(accepted) / static_cast<double>(proposed);
          if (rate > 0.5) step *= 1.2;
          if (rate < 0.3) step *= 0.8;
          step = std::clamp(step, 1e-6, kPi);
          accepted = proposed = 0;
        }
      } else {
        trace.push_back(e);
      }
    }

    // Batch means over kJackknifeBlocks batches.
    const std::size_t n = trace.size();
    const int nb = static_cast<int>(std::min<std::size_t>(kJackknifeBlocks, n));
    const auto off = detail::block_offsets(n, nb);
    const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : trace) var += (v - mean) * (v - mean);
    var /= static_cast<double>(std::max<std::size_t>(n - 1, 1));
    double var_batch = 0.0;
    for (int b = 0; b < nb; ++b) {
      const double bm = std::accumulate(trace.begin() + off[b], trace.begin() + off[b + 1], 0.0) /
                        static_cast<double>(off[b + 1] - off[b]);
      var_batch += (bm - mean) * (bm - mean);
    }
    var_batch /= std::max(nb - 1, 1);

    McEstimate est;
    est.beta = beta;
    est.samples = n;
    est.mean_energy = mean;
    est.std_error = std::sqrt(var_batch / nb);
    est.min_energy_seen = *std::min_element(trace.begin(), trace.end());
    const double batch_len = static_cast<double>(n) / nb;
    const double tau = var > 0 ? std::max(1.0, batch_len * var_batch / var) : 1.0;
    est.effective_sample_size = static_cast<double>(n) / tau;
    run.estimates.push_back(est);
  }
  return run;
}

// ---------------------------------------------------------------------------
// One-particle Gaussian ensemble

struct Z1Estimate {
  double z1 = 0.0;
  double log_z1 = 0.0;
  double z1_std_error = 0.0;
  /// Second-moment matrix <<z z^dagger>>, entry (a, b) = <<z_a conj(z_b)>>.
  /// The averaged constraints hold when it equals the identity.
  ComplexMatrix constraint_avg;
  /// Jackknife errors of the real and imaginary parts of constraint_avg.
  ComplexMatrix constraint_std_error;
  double mean_energy = 0.0;
  double mean_energy_std_error = 0.0;
  std::size_t samples = 0;
};

/// Z_1 = int d^{2r}z exp(-beta E_1(z) - <z|omega z> + tr omega), by sampling
/// z from the complex Gaussian with covariance omega^{-1}:
/// Z_1 = pi^r e^{tr omega} / det omega * E_gauss[exp(-beta E_1)].
inline Z1Estimate z1_mc(const CostOperator& cop, double beta, const LagrangeMultipliers& lm, std::size_t samples,
                        std::uint64_t seed, int threads = 1) {
  const int r = cop.rank();
  if (lm.rank() != r) throw ValidationError("z1_mc: omega has the wrong size");
  if (!lm.is_positive_definite()) throw ValidationError("z1_mc: omega must be positive definite");
  if (!(beta >= 0)) throw ValidationError("z1_mc: beta must be >= 0");
  if (samples < 2) throw ValidationError("z1_mc: need at least two samples");

  const Eigen::LLT<ComplexMatrix> llt(lm.matrix());
  const ComplexMatrix lower = llt.matrixL();
  const ComplexMatrix upper = lower.adjoint();  // omega = L L^dagger

  const int blocks = static_cast<int>(std::min<std::size_t>(kJackknifeBlocks, samples));
  const auto off = detail::block_offsets(samples, blocks);
  std::vector<double> s0(blocks, 0.0), s1(blocks, 0.0);
  std::vector<ComplexMatrix> sm(blocks, ComplexMatrix::Zero(r, r));

  detail::for_each_block(blocks, threads, [&](int b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    ComplexVector g(r);
    for (std::size_t k = off[b]; k < off[b + 1]; ++k) {
      for (int a = 0; a < r; ++a) g(a) = complex_normal(rng);
      const ComplexVector z = upper.triangularView<Eigen::Upper>().solve(g);  // cov = omega^{-1}
      const double e = cop.row_energy(z);
      const double w = std::exp(-beta * e);
      s0[b] += w;
      s1[b] += w * e;
      sm[b] += w * (z * z.adjoint());
    }
  });

  const double t0 = std::accumulate(s0.begin(), s0.end(), 0.0);
  const double t1 = std::accumulate(s1.begin(), s1.end(), 0.0);
  ComplexMatrix tm = ComplexMatrix::Zero(r, r);
  for (const auto& m : sm) tm += m;

  const double n = static_cast<double>(samples);
  const double log_gauss = lm.matrix().trace().real() + r * std::log(kPi) - std::log(lm.matrix().determinant().real());

  Z1Estimate est;
  est.samples = samples;
  est.log_z1 = log_gauss + std::log(t0 / n);
  est.z1 = std::exp(est.log_z1);
  est.constraint_avg = tm / t0;
  est.mean_energy = t1 / t0;

  std::vector<double> loo_z(blocks), loo_e(blocks);
  std::vector<ComplexMatrix> loo_m(blocks);
  for (int b = 0; b < blocks; ++b) {
    const double nb = n - static_cast<double>(off[b + 1] - off[b]);
    loo_z[b] = (t0 - s0[b]) / nb;
    loo_e[b] = (t1 - s1[b]) / (t0 - s0[b]);
    loo_m[b] = (tm - sm[b]) / (t0 - s0[b]);
  }
  est.z1_std_error = std::exp(log_gauss) * detail::jackknife_error(loo_z);
  est.mean_energy_std_error = detail::jackknife_error(loo_e);
  est.constraint_std_error = ComplexMatrix::Zero(r, r);
  std::vector<double> re(blocks), im(blocks);
  for (int a = 0; a < r; ++a)
    for (int c = 0; c < r; ++c) {
      for (int b = 0; b < blocks; ++b) {
        re[b] = loo_m[b](a, c).real();
        im[b] = loo_m[b](a, c).imag();
      }
      est.constraint_std_error(a, c) = {detail::jackknife_error(re), detail::jackknife_error(im)};
    }
  return est;
}

}  // namespace sepstat
