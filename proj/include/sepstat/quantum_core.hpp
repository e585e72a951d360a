#pragma once

// Dense bipartite quantum-state primitives on C^m (x) C^n.
//
// Index convention: the basis vector |i>|j> (i in A, j in B) has flat index
// i * n + j.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "sepstat/types.hpp"

namespace sepstat {

struct Dims {
  int m = 0;  // dim H_A
  int n = 0;  // dim H_B

  [[nodiscard]] int total() const { return m * n; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline void check_dims(const Dims& d) {
  if (d.m < 1 || d.n < 1) throw ValidationError("subsystem dimensions must be >= 1");
}

/// A (possibly subnormalized) vector in C^m (x) C^n.
class PureState {
 public:
  PureState() = default;
  PureState(Dims dims, ComplexVector amps) : dims_(dims), amps_(std::move(amps)) {
    check_dims(dims_);
    if (amps_.size() != dims_.total())
      throw ValidationError("pure state length " + std::to_string(amps_.size()) +
                            " does not match m*n = " + std::to_string(dims_.total()));
  }

  /// |i>|j>
  static PureState product_basis(Dims dims, int i, int j) {
    ComplexVector v = ComplexVector::Zero(dims.total());
    v(i * dims.n + j) = 1.0;
    return {dims, std::move(v)};
  }

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] const ComplexVector& amps() const { return amps_; }
  [[nodiscard]] double norm() const { return amps_.norm(); }
  [[nodiscard]] bool is_normalized(double tol = 1e-12) const { return std::abs(norm() - 1.0) <= tol; }

  /// m x n matrix C with psi = sum_ij C_ij |i>|j>.
  [[nodiscard]] ComplexMatrix coefficients() const {
    ComplexMatrix c(dims_.m, dims_.n);
    for (int i = 0; i < dims_.m; ++i)
      for (int j = 0; j < dims_.n; ++j) c(i, j) = amps_(i * dims_.n + j);
    return c;
  }

  [[nodiscard]] PureState scaled(cplx t) const { return {dims_, amps_ * t}; }

 private:
  Dims dims_{1, 1};
  ComplexVector amps_ = ComplexVector::Zero(1);
};

struct DensityTolerances {
  double hermitian = 1e-12;
  double trace = 1e-12;
  double min_eigenvalue = -1e-10;
};

/// Mixed state on C^m (x) C^n. Always Hermitian, PSD and unit trace.
class DensityMatrix {
 public:
  DensityMatrix() = default;

  /// Validates and wraps `mat`. Throws ValidationError("invalid density matrix: ...").
  DensityMatrix(Dims dims, ComplexMatrix mat, const DensityTolerances& tol = {})
      : dims_(dims), mat_(std::move(mat)) {
    check_dims(dims_);
    const auto d = dims_.total();
    if (mat_.rows() != d || mat_.cols() != d)
      throw ValidationError("invalid density matrix: expected " + std::to_string(d) + "x" +
                            std::to_string(d) + " matrix");
    if (!all_finite(mat_)) throw ValidationError("invalid density matrix: non-finite entries");
    if (max_abs(mat_ - mat_.adjoint()) > tol.hermitian)
      throw ValidationError("invalid density matrix: not Hermitian");
    const cplx tr = mat_.trace();
    if (std::abs(tr - 1.0) > tol.trace)
      throw ValidationError("invalid density matrix: trace " + std::to_string(tr.real()) + " != 1");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(mat_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < tol.min_eigenvalue)
      throw ValidationError("invalid density matrix: negative eigenvalue " +
                            std::to_string(es.eigenvalues().minCoeff()));
  }

  static DensityMatrix from_pure(const PureState& psi) {
    ComplexVector v = psi.amps() / psi.norm();
    return {psi.dims(), v * v.adjoint()};
  }

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] const ComplexMatrix& matrix() const { return mat_; }

 private:
  Dims dims_{1, 1};
  ComplexMatrix mat_ = ComplexMatrix::Ones(1, 1);
};

/// The fixed reference decomposition rho = sum_a |e_a><e_a| with
/// <e_a|e_b> = lambda_a delta_ab. Vectors are stored as the columns of an
/// mn x r matrix, in order of decreasing eigenvalue.
struct EigenEnsemble {
  Dims dims;
  ComplexMatrix vectors;
  RealVector eigenvalues;

  [[nodiscard]] int rank() const { return static_cast<int>(vectors.cols()); }
  [[nodiscard]] PureState vector(int alpha) const { return {dims, vectors.col(alpha)}; }
  [[nodiscard]] ComplexMatrix reconstruct() const { return vectors * vectors.adjoint(); }
};

inline ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline ComplexVector tensor_product(const ComplexVector& a, const ComplexVector& b) {
  ComplexVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

/// Reduced matrix of an operator on C^m (x) C^n.
inline ComplexMatrix partial_trace(const ComplexMatrix& rho, const Dims& dims, Subsystem keep) {
  check_dims(dims);
  const int m = dims.m, n = dims.n;
  if (rho.rows() != m * n || rho.cols() != m * n)
    throw ValidationError("partial_trace: operator size does not match m*n");
  if (keep == Subsystem::A) {
    ComplexMatrix out = ComplexMatrix::Zero(m, m);
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k)
        for (int j = 0; j < n; ++j) out(i, k) += rho(i * n + j, k * n + j);
    return out;
  }
  ComplexMatrix out = ComplexMatrix::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < m; ++i) out(j, l) += rho(i * n + j, i * n + l);
  return out;
}

inline ComplexMatrix partial_trace(const DensityMatrix& rho, Subsystem keep) {
  return partial_trace(rho.matrix(), rho.dims(), keep);
}

/// tr_B |psi><psi| = C C^dagger (keep A) or tr_A |psi><psi| = C^T conj(C) (keep B).
inline ComplexMatrix partial_trace(const PureState& psi, Subsystem keep) {
  const ComplexMatrix c = psi.coefficients();
  if (keep == Subsystem::A) return c * c.adjoint();
  return c.transpose() * c.conjugate();
}

/// Subnormalized eigenensemble: e_a = sqrt(lambda_a) * (unit eigenvector) for
/// every eigenvalue above `cutoff`.
inline EigenEnsemble eigen_ensemble(const DensityMatrix& rho, double cutoff = 1e-10) {
  if (!(cutoff > 0)) throw ValidationError("eigen_ensemble: cutoff must be positive");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho.matrix());
  const RealVector& ev = es.eigenvalues();  // ascending
  if (ev.minCoeff() < -1e-10) throw ValidationError("eigen_ensemble: state is not positive semidefinite");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = ev.size() - 1; k >= 0; --k)
    if (ev(k) > cutoff) keep.push_back(k);
  EigenEnsemble ens;
  ens.dims = rho.dims();
  ens.vectors.resize(ev.size(), static_cast<Eigen::Index>(keep.size()));
  ens.eigenvalues.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a) {
    const auto k = keep[a];
    ens.eigenvalues(a) = ev(k);
    ens.vectors.col(a) = std::sqrt(ev(k)) * es.eigenvectors().col(k);
  }
  return ens;
}

/// Haar-distributed d x d unitary: QR of a Ginibre matrix with the phases of
/// diag(R) moved into Q (without the fix Q is not Haar).
inline ComplexMatrix haar_unitary(int d, Rng& rng) {
  if (d < 1) throw ValidationError("haar_unitary: dimension must be >= 1");
  const ComplexMatrix g = ginibre(d, d, rng);
  Eigen::HouseholderQR<ComplexMatrix> qr(g);
  ComplexMatrix q = qr.householderQ();
  const ComplexMatrix& r = qr.matrixQR();
  for (int k = 0; k < d; ++k) {
    const cplx rkk = r(k, k);
    const double a = std::abs(rkk);
    q.col(k) *= (a > 0 ? rkk / a : cplx(1.0));
  }
  return q;
}

inline ComplexMatrix haar_unitary(int d, std::uint64_t seed) {
  Rng rng(seed);
  return haar_unitary(d, rng);
}

/// rho^{T_B}: transpose on the B factor.
inline ComplexMatrix partial_transpose(const ComplexMatrix& rho, const Dims& dims) {
  const int m = dims.m, n = dims.n;
  ComplexMatrix out(m * n, m * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < n; ++l) out(i * n + j, k * n + l) = rho(i * n + l, k * n + j);
  return out;
}

inline double min_partial_transpose_eigenvalue(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(partial_transpose(rho.matrix(), rho.dims()),
                                                  Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// PPT is necessary and sufficient for separability only when m*n <= 6.
inline bool ppt_is_conclusive(const Dims& dims) { return dims.total() <= 6; }

/// True iff the partial transpose has an eigenvalue below -tol. For
/// m*n > 6 a `false` result does not imply separability.
inline bool ppt_is_entangled(const DensityMatrix& rho, double tol = 1e-10) {
  return min_partial_transpose_eigenvalue(rho) < -tol;
}

/// Random mixed state G G^dagger / tr with a Ginibre G of `rank` columns.
inline DensityMatrix random_density_matrix(Dims dims, int rank, Rng& rng) {
  const ComplexMatrix g = ginibre(dims.total(), rank, rng);
  ComplexMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return {dims, rho};
}

inline PureState random_pure_state(Dims dims, Rng& rng) {
  ComplexVector v = ginibre(dims.total(), 1, rng).col(0);
  v.normalize();
  return {dims, v};
}

}  // namespace sepstat
