#pragma once

// Small dense local optimizers used by the saddle search.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/LU>

#include "sepstat/types.hpp"

namespace sepstat::opt {

struct Minimum {
  RealVector x;
  double value = 0.0;
  int iterations = 0;
};

struct NelderMeadOptions {
  double initial_step = 0.5;
  double x_tol = 1e-10;
  double f_tol = 1e-30;
  int max_iterations = 2000;
};

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
inline Minimum nelder_mead(const std::function<double(const RealVector&)>& f, const RealVector& x0,
                           const NelderMeadOptions& o = {}) {
  const auto n = x0.size();
  std::vector<RealVector> pts(n + 1, x0);
  std::vector<double> val(n + 1);
  for (Eigen::Index k = 0; k < n; ++k) pts[k + 1](k) += o.initial_step;
  for (Eigen::Index k = 0; k <= n; ++k) val[k] = f(pts[k]);

  std::vector<int> idx(n + 1);
  int it = 0;
  for (; it < o.max_iterations; ++it) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] < val[b]; });
    const int best = idx.front(), worst = idx.back(), second = idx[n - 1];

    double spread = 0.0;
    for (int k : idx) spread = std::max(spread, (pts[k] - pts[best]).cwiseAbs().maxCoeff());
    if (spread < o.x_tol || val[worst] - val[best] < o.f_tol) break;

    RealVector centroid = RealVector::Zero(n);
    for (int k : idx)
      if (k != worst) centroid += pts[k];
    centroid /= static_cast<double>(n);

    const RealVector xr = centroid + (centroid - pts[worst]);
    const double fr = f(xr);
    if (fr < val[best]) {
      const RealVector xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
    } else if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
    } else {
      const bool outside = fr < val[worst];
      const RealVector xc = outside ? RealVector(centroid + 0.5 * (xr - centroid))
                                    : RealVector(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = f(xc);
      if (fc < std::min(fr, val[worst])) {
        pts[worst] = xc;
        val[worst] = fc;
      } else {
        for (int k : idx)
          if (k != best) {
            pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
            val[k] = f(pts[k]);
          }
      }
    }
  }
  const auto best = std::min_element(val.begin(), val.end()) - val.begin();
  return {pts[best], val[best], it};
}

struct LevenbergMarquardtOptions {
  double fd_step = 1e-7;
  int max_iterations = 100;
  double min_step = 1e-15;
};

/// Damped Gauss-Newton on sum r(x)^2 with a central-difference Jacobian.
/// Only accepts steps that lower the objective, so the result is never worse
/// than x0.
inline Minimum levenberg_marquardt(const std::function<RealVector(const RealVector&)>& residual,
                                   const RealVector& x0, const LevenbergMarquardtOptions& o = {}) {
  RealVector x = x0;
  RealVector r = residual(x);
  double cost = r.squaredNorm();
  double mu = 1e-3;
  int it = 0;
  for (; it < o.max_iterations && cost > 0; ++it) {
    Eigen::MatrixXd jac(r.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      RealVector xp = x, xm = x;
      const double h = o.fd_step * std::max(1.0, std::abs(x(k)));
      xp(k) += h;
      xm(k) -= h;
      jac.col(k) = (residual(xp) - residual(xm)) / (2.0 * h);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const RealVector jtr = jac.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += mu * jtj.diagonal().cwiseMax(1e-12);
      const RealVector step = a.fullPivLu().solve(-jtr);
      if (!step.allFinite()) {
        mu *= 10.0;
        continue;
      }
      const RealVector xn = x + step;
      const RealVector rn = residual(xn);
      const double cn = rn.squaredNorm();
      if (std::isfinite(cn) && cn < cost) {
        x = xn;
        r = rn;
        const bool tiny = step.norm() < o.min_step * (1.0 + x.norm());
        cost = cn;
        mu = std::max(mu / 10.0, 1e-12);
        improved = !tiny;
        break;
      }
      mu *= 10.0;
    }
    if (!improved) break;
  }
  return {x, cost, it};
}

}  // namespace sepstat::opt
