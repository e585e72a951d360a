#pragma once

// Pure-state product tests based on the generalized concurrence squared
//
//   c^2(psi) = ||psi||^4 - tr (tr_B |psi><psi|)^2,
//
// which vanishes exactly on product vectors.

#include <cmath>
#include <vector>

#include <Eigen/LU>

#include "sepstat/quantum_core.hpp"

namespace sepstat {

/// Prefactor turning the skew-space sum into c^2.
///
/// Pi = (1 - SWAP)/2 on each doubled factor gives
/// ||psi||^4 - tr sigma_A^2 = 2 <psi psi| Pi_m (x) Pi_n |psi psi>, so the
/// constant is 2 (not 1/2).
inline constexpr double kSkewPrefactor = 2.0;

inline constexpr double kDefaultProductTol = 1e-9;

inline double concurrence_sq(const PureState& psi) {
  const ComplexMatrix sigma = partial_trace(psi, Subsystem::A);
  const double n2 = psi.amps().squaredNorm();
  const double c2 = n2 * n2 - sigma.squaredNorm();  // tr sigma^2 = ||sigma||_F^2
  return std::max(c2, 0.0);
}

/// Orthonormal basis of C^m ^ C^m, stored as the columns of an m^2 x d matrix.
struct SkewBasis {
  int dim = 0;
  ComplexMatrix vectors;

  [[nodiscard]] int size() const { return static_cast<int>(vectors.cols()); }
};

/// {(|ij> - |ji>)/sqrt(2) : i < j} in lexicographic (i, j) order.
inline SkewBasis skew_basis(int m) {
  if (m < 2) throw ValidationError("skew_basis: dimension must be >= 2");
  SkewBasis basis;
  basis.dim = m;
  basis.vectors = ComplexMatrix::Zero(m * m, m * (m - 1) / 2);
  int col = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j, ++col) {
      basis.vectors(i * m + j, col) = M_SQRT1_2;
      basis.vectors(j * m + i, col) = -M_SQRT1_2;
    }
  return basis;
}

/// Reorders a vector on (A B) (x) (A' B') into (A A') (x) (B B').
///
/// Input index  ((i n + j) mn + (i' n + j'))
/// Output index ((i m + i') n^2 + (j n + j'))
///
/// Example (m = n = 2): Psi- (x) Psi- has amplitude +1/2 on |01>|10> with
/// (i,j,i',j') = (0,1,1,0), which lands on |01>_{AA'} |10>_{BB'}; its overlap
/// with zeta (x) zeta is 1/2 * (4 terms of +-1/2 * 1/2) = 1/2.
inline ComplexVector reorder_to_doubled_factors(const ComplexVector& v, const Dims& dims) {
  const int m = dims.m, n = dims.n, mn = m * n;
  if (v.size() != mn * mn) throw ValidationError("reorder: vector size must be (mn)^2");
  ComplexVector out(mn * mn);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int ip = 0; ip < m; ++ip)
        for (int jp = 0; jp < n; ++jp)
          out((i * m + ip) * n * n + (j * n + jp)) = v((i * n + j) * mn + (ip * n + jp));
  return out;
}

/// d1 x d2 matrix of <zeta_a (x) zeta~_b | psi (x) phi>, with the AB A'B' -> AA' BB'
/// reordering applied to psi (x) phi.
inline ComplexMatrix skew_amplitudes(const PureState& psi, const PureState& phi, const SkewBasis& basis_a,
                                     const SkewBasis& basis_b) {
  const Dims& d = psi.dims();
  if (!(phi.dims() == d) || basis_a.dim != d.m || basis_b.dim != d.n)
    throw ValidationError("skew_amplitudes: dimension mismatch");
  const ComplexVector doubled = reorder_to_doubled_factors(tensor_product(psi.amps(), phi.amps()), d);
  // View as (m^2) x (n^2) matrix X with X(aa', bb'); then <za (x) zb|X> = za^H X conj(zb).
  ComplexMatrix x(d.m * d.m, d.n * d.n);
  for (int p = 0; p < d.m * d.m; ++p)
    for (int q = 0; q < d.n * d.n; ++q) x(p, q) = doubled(p * d.n * d.n + q);
  return basis_a.vectors.adjoint() * x * basis_b.vectors.conjugate();
}

inline double concurrence_sq_skew(const PureState& psi, const SkewBasis& basis_a, const SkewBasis& basis_b) {
  return kSkewPrefactor * skew_amplitudes(psi, psi, basis_a, basis_b).squaredNorm();
}

/// Product test on the normalized concurrence c^2 / ||psi||^4.
inline bool is_product(const PureState& psi, double tol = kDefaultProductTol) {
  const double n2 = psi.amps().squaredNorm();
  if (!(n2 > 0)) throw ValidationError("is_product: zero vector");
  return concurrence_sq(psi) / (n2 * n2) < tol;
}

/// det(sigma_A - 1) for a normalized psi; zero iff psi is product.
inline double det_product_test(const PureState& psi) {
  if (!psi.is_normalized(1e-10)) throw ValidationError("det_product_test: state must be normalized");
  const ComplexMatrix sigma = partial_trace(psi, Subsystem::A);
  const ComplexMatrix shifted = sigma - ComplexMatrix::Identity(sigma.rows(), sigma.cols());
  return shifted.determinant().real();
}

/// The r x r matrices h^{ab}_{alpha beta} = <zeta_a (x) zeta~_b | e_alpha (x) e_beta>.
/// Each is symmetric.
struct HMatrixSet {
  int rank = 0;
  int d1 = 0;
  int d2 = 0;
  std::vector<ComplexMatrix> matrices;  // index a * d2 + b

  [[nodiscard]] const ComplexMatrix& at(int a, int b) const { return matrices[a * d2 + b]; }
};

inline HMatrixSet h_matrices(const EigenEnsemble& ens) {
  const Dims& d = ens.dims;
  const SkewBasis za = skew_basis(d.m);
  const SkewBasis zb = skew_basis(d.n);
  const int r = ens.rank();
  HMatrixSet set;
  set.rank = r;
  set.d1 = za.size();
  set.d2 = zb.size();
  set.matrices.assign(set.d1 * set.d2, ComplexMatrix::Zero(r, r));
  for (int al = 0; al < r; ++al)
    for (int be = 0; be < r; ++be) {
      const ComplexMatrix amp = skew_amplitudes(ens.vector(al), ens.vector(be), za, zb);
      for (int a = 0; a < set.d1; ++a)
        for (int b = 0; b < set.d2; ++b) set.matrices[a * set.d2 + b](al, be) = amp(a, b);
    }
  return set;
}

}  // namespace sepstat
