#pragma once

// Adaptive vector-valued Gauss-Kronrod (7/15) quadrature for integrals of the
// form int_0^inf g(x) dx whose integrand has an exp(-x/c) tail and features
// spread over many decades of x. Integration runs in t = ln x; every
// component shares the same panels, so moments of one weight are computed
// in a single pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sepstat/types.hpp"

namespace sepstat::quad {

/// Fills out(k) = g_k(x).
using VectorIntegrand = std::function<void(double x, Eigen::Ref<RealVector> out)>;

struct Options {
  double rel_tol = 1e-13;
  int max_panels = 4000;
};

struct Result {
  RealVector value;
  RealVector error;  // Kronrod-Gauss difference + tail bound, per component
  int panels = 0;
};

namespace detail {

struct Panel {
  double a = 0, b = 0;
  RealVector value, error, l1;
  double priority = 0;
  bool operator<(const Panel& o) const { return priority < o.priority; }
};

inline Panel gk15(const VectorIntegrand& g, int dim, double a, double b) {
  using boost::math::quadrature::gauss;
  using boost::math::quadrature::gauss_kronrod;
  const auto& xk = gauss_kronrod<double, 15>::abscissa();
  const auto& wk = gauss_kronrod<double, 15>::weights();
  const auto& wg = gauss<double, 7>::weights();

  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  RealVector fx(dim), kron = RealVector::Zero(dim), gaus = RealVector::Zero(dim), l1 = RealVector::Zero(dim);
  auto eval = [&](double t) {
    const double x = std::exp(t);
    g(x, fx);
    fx *= x;  // dx = x dt
  };
  for (std::size_t k = 0; k < xk.size(); ++k) {
    for (int sign : {1, -1}) {
      if (k == 0 && sign < 0) continue;
      eval(mid + sign * half * xk[k]);
      kron += wk[k] * fx;
      l1 += wk[k] * fx.cwiseAbs();
      if (k % 2 == 0) gaus += wg[k / 2] * fx;
    }
  }
  Panel p;
  p.a = a;
  p.b = b;
  p.value = half * kron;
  p.error = (half * (kron - gaus)).cwiseAbs();
  p.l1 = half * l1;
  return p;
}

}  // namespace detail

/// int_0^inf g(x) dx for g(x) = exp(-x/c) q(x) with |q| non-increasing up to
/// a factor x. `breaks` (positive x values) mark scale changes of q.
///
/// [0, x_lo] is taken as x_lo * g(0); x_lo is 36 e-folds below the smallest
/// break, so its relative contribution is O(e^-36) of the panel values. The
/// upper limit is pushed out until |g(X)| c (1 + c/X), which bounds the tail
/// for such g, is below rel_tol * 1e-3 of each component's L1 mass.
inline Result integrate_half_line(const VectorIntegrand& g, int dim, double c, std::vector<double> breaks,
                                  const Options& opt = {}) {
  if (!(c > 0)) throw ValidationError("quadrature: decay scale must be positive");
  breaks.push_back(c);
  for (double b : breaks)
    if (!(b > 0) || !std::isfinite(b)) throw ValidationError("quadrature: breakpoints must be positive and finite");
  std::sort(breaks.begin(), breaks.end());
  const double t_lo = std::log(breaks.front()) - 36.0;

  // Upper limit.
  RealVector gx(dim);
  double x_hi = 35.0 * c;
  while (x_hi < breaks.back() * 35.0) x_hi *= 2.0;

  std::vector<double> cuts{t_lo};
  for (double b : breaks)
    if (std::log(b) > cuts.back() && std::log(b) < std::log(x_hi)) cuts.push_back(std::log(b));

  std::priority_queue<detail::Panel> heap;
  RealVector total = RealVector::Zero(dim), err = RealVector::Zero(dim), l1 = RealVector::Zero(dim);
  int panels = 0;
  auto push = [&](detail::Panel p) {
    total += p.value;
    err += p.error;
    l1 += p.l1;
    ++panels;
    heap.push(std::move(p));
  };

  auto add_range = [&](double ta, double tb) {
    // Split long ranges into unit-length pieces in t so the initial mesh
    // resolves every decade.
    const int pieces = std::max(1, static_cast<int>(std::ceil(tb - ta)));
    for (int k = 0; k < pieces; ++k)
      push(detail::gk15(g, dim, ta + (tb - ta) * k / pieces, ta + (tb - ta) * (k + 1) / pieces));
  };

  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) add_range(cuts[k], cuts[k + 1]);
  add_range(cuts.back(), std::log(x_hi));

  auto tail_bound = [&](double x) {
    g(x, gx);
    return RealVector(gx.cwiseAbs() * c * (1.0 + c / x));
  };
  RealVector tail = tail_bound(x_hi);
  for (int guard = 0; guard < 60 && (tail.array() > 1e-3 * opt.rel_tol * l1.array()).any(); ++guard) {
    const double next = 2.0 * x_hi;
    add_range(std::log(x_hi), std::log(next));
    x_hi = next;
    tail = tail_bound(x_hi);
  }

  // Small-x piece.
  const double x_lo = std::exp(t_lo);
  g(0.0, gx);
  total += x_lo * gx;
  l1 += x_lo * gx.cwiseAbs();

  auto converged = [&] { return ((err + tail).array() <= opt.rel_tol * l1.array()).all(); };

  {
    // Rank the initial mesh now that the scale of each component is known.
    std::vector<detail::Panel> initial;
    while (!heap.empty()) {
      initial.push_back(heap.top());
      heap.pop();
    }
    for (auto& p : initial) {
      p.priority = (p.error.array() / l1.array().max(1e-300)).maxCoeff();
      heap.push(std::move(p));
    }
  }
  while (!converged()) {
    if (panels >= opt.max_panels) {
      const double achieved = ((err + tail).array() / l1.array().max(1e-300)).maxCoeff();
      throw ConvergenceError("quadrature did not converge: achieved relative error " + std::to_string(achieved) +
                             " after " + std::to_string(panels) + " panels");
    }
    // Refine the panel with the largest error relative to the tolerance.
    detail::Panel worst = heap.top();
    heap.pop();
    total -= worst.value;
    err -= worst.error;
    l1 -= worst.l1;
    --panels;
    const double m = 0.5 * (worst.a + worst.b);
    auto left = detail::gk15(g, dim, worst.a, m);
    auto right = detail::gk15(g, dim, m, worst.b);
    for (auto* p : {&left, &right}) p->priority = (p->error.array() / l1.array().max(1e-300)).maxCoeff();
    push(std::move(left));
    push(std::move(right));
  }

  Result r;
  r.value = total;
  r.error = err + tail;
  r.panels = panels;
  return r;
}

}  // namespace sepstat::quad
