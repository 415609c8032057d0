// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Small dense complex Hermitian linear algebra on top of Eigen. Matrices here
// are microphone-count sized (N <= 16), so everything is dense and direct.

#ifndef MASKBF_LINALG_HPP
#define MASKBF_LINALG_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "maskbf/errors.hpp"

namespace maskbf {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

namespace detail {

inline std::string dims(const CMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace detail

/// Square complex matrix equal to its conjugate transpose.
///
/// Construction checks Hermitian symmetry to 1e-10 relative to the largest
/// entry and stores the symmetrized matrix (M + M^H) / 2, which removes the
/// rounding-level asymmetry covariance accumulation leaves behind.
class HermitianMatrix {
 public:
  static constexpr double kSymmetryTolerance = 1e-10;

  explicit HermitianMatrix(const CMatrix& m) {
    if (m.rows() == 0 || m.rows() != m.cols())
      throw DimensionMismatch("hermitian matrix must be square and non-empty, got " +
                              detail::dims(m));
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (!(asym <= kSymmetryTolerance * scale))
      throw NotHermitian("asymmetry " + std::to_string(asym));
    m_ = (m + m.adjoint()) * 0.5;
  }

  /// Symmetrizes without the tolerance check. For matrices that are Hermitian
  /// by construction but built from inexact arithmetic.
  static HermitianMatrix symmetrized(const CMatrix& m) {
    if (m.rows() == 0 || m.rows() != m.cols())
      throw DimensionMismatch("hermitian matrix must be square and non-empty, got " +
                              detail::dims(m));
    return HermitianMatrix(((m + m.adjoint()) * 0.5).eval(), Unchecked{});
  }

  static HermitianMatrix identity(Eigen::Index n) {
    return HermitianMatrix(CMatrix::Identity(n, n), Unchecked{});
  }

  Eigen::Index dim() const { return m_.rows(); }
  const CMatrix& matrix() const { return m_; }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  double trace() const { return m_.trace().real(); }

  HermitianMatrix operator+(const HermitianMatrix& o) const {
    check_same(o);
    return HermitianMatrix(m_ + o.m_, Unchecked{});
  }
  HermitianMatrix operator*(double c) const { return HermitianMatrix(m_ * c, Unchecked{}); }

 private:
  struct Unchecked {};
  HermitianMatrix(CMatrix m, Unchecked) : m_(std::move(m)) {}

  void check_same(const HermitianMatrix& o) const {
    if (o.dim() != dim())
      throw DimensionMismatch(std::to_string(dim()) + " vs " + std::to_string(o.dim()));
  }

  CMatrix m_;
};

struct EigenPair {
  double value = 0.0;
  CVector vector;  // unit norm, canonical phase
};

enum class Extreme { max, min };

/// Full generalized eigensystem of A w = lambda B w. Eigenvalues ascend and
/// the eigenvector columns are B-orthonormal (W^H B W = I).
struct GeneralizedEigenSystem {
  RVector values;
  CMatrix vectors;

  Eigen::Index extreme_index(Extreme which) const {
    return which == Extreme::max ? values.size() - 1 : 0;
  }
  /// Distance from the chosen extreme eigenvalue to its nearest neighbour;
  /// infinite for 1x1 problems.
  double extreme_gap(Extreme which) const {
    if (values.size() < 2) return std::numeric_limits<double>::infinity();
    const auto n = values.size();
    return which == Extreme::max ? values(n - 1) - values(n - 2) : values(1) - values(0);
  }
};

/// Rotates v so that its largest-magnitude entry (first one on ties) is real
/// and non-negative.
inline CVector canonicalize_phase(const CVector& v) {
  Eigen::Index p = 0;
  v.cwiseAbs().maxCoeff(&p);
  const double mag = std::abs(v(p));
  if (mag == 0.0) return v;
  return v * (std::conj(v(p)) / mag);
}

inline Eigen::Index canonical_index(const CVector& v) {
  Eigen::Index p = 0;
  v.cwiseAbs().maxCoeff(&p);
  return p;
}

inline void check_positive_definite(const HermitianMatrix& b) {
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(b.matrix(), Eigen::EigenvaluesOnly);
  const double floor = 1e-12 * b.trace() / static_cast<double>(b.dim());
  const double lmin = es.eigenvalues()(0);
  if (!(lmin > floor) || !std::isfinite(lmin))
    throw NotPositiveDefinite("minimum eigenvalue " + std::to_string(lmin) +
                              " at or below " + std::to_string(floor));
}

/// Solves the Hermitian-definite pencil by Cholesky reduction:
/// B = L L^H, C = L^-1 A L^-H, C u = lambda u, w = L^-H u.
inline GeneralizedEigenSystem generalized_eigensystem(const HermitianMatrix& a,
                                                      const HermitianMatrix& b) {
  if (a.dim() != b.dim())
    throw DimensionMismatch("pencil dimensions " + std::to_string(a.dim()) + " and " +
                            std::to_string(b.dim()));
  check_positive_definite(b);
  const Eigen::LLT<CMatrix> llt(b.matrix());
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("cholesky factorization failed");
  const CMatrix l = llt.matrixL();
  CMatrix c = l.triangularView<Eigen::Lower>().solve(a.matrix());
  c = l.triangularView<Eigen::Lower>().solve(c.adjoint().eval()).adjoint();
  c = (c + c.adjoint()).eval() * 0.5;
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(c);
  GeneralizedEigenSystem out;
  out.values = es.eigenvalues();
  out.vectors = l.adjoint().triangularView<Eigen::Upper>().solve(es.eigenvectors());
  return out;
}

/// Standard Hermitian eigensystem, ascending, orthonormal columns.
inline GeneralizedEigenSystem standard_eigensystem(const HermitianMatrix& a) {
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(a.matrix());
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Extreme generalized eigenpair of A w = lambda B w, unit norm, canonical phase.
inline EigenPair gev_extreme(const HermitianMatrix& a, const HermitianMatrix& b, Extreme which) {
  const auto sys = generalized_eigensystem(a, b);
  const auto i = sys.extreme_index(which);
  CVector w = sys.vectors.col(i);
  w.normalize();
  return {sys.values(i), canonicalize_phase(w)};
}

/// Maximum eigenpair of A w = lambda w, unit norm, canonical phase.
inline EigenPair sev_max(const HermitianMatrix& a) {
  const auto sys = standard_eigensystem(a);
  const auto i = sys.values.size() - 1;
  return {sys.values(i), canonicalize_phase(sys.vectors.col(i))};
}

namespace detail {
// rcond() alone misses exactly zero pivots (the estimate divides by them), so
// the pivot spread is checked too.
inline void check_conditioning(const Eigen::PartialPivLU<CMatrix>& lu) {
  const RVector piv = lu.matrixLU().diagonal().cwiseAbs();
  const double rcond = lu.rcond();
  const double spread = piv.maxCoeff() > 0.0 ? piv.minCoeff() / piv.maxCoeff() : 0.0;
  if (!(rcond > 1e-12) || !(spread > 1e-14) || !std::isfinite(rcond))
    throw SingularMatrix("reciprocal condition estimate " + std::to_string(std::min(rcond, spread)));
}
}  // namespace detail

/// Solves A x = b for Hermitian A by partially pivoted LU.
inline CVector solve(const HermitianMatrix& a, const CVector& b) {
  if (b.size() != a.dim())
    throw DimensionMismatch("rhs length " + std::to_string(b.size()) + " for " +
                            std::to_string(a.dim()) + "x" + std::to_string(a.dim()) + " system");
  const Eigen::PartialPivLU<CMatrix> lu(a.matrix());
  detail::check_conditioning(lu);
  return lu.solve(b);
}

/// General square solve used by adjoint computations (A^-H g and friends).
inline CMatrix solve_general(const CMatrix& a, const CMatrix& b) {
  const Eigen::PartialPivLU<CMatrix> lu(a);
  detail::check_conditioning(lu);
  return lu.solve(b);
}

/// |<a, b>| / (|a| |b|); 1 means the vectors span the same complex line.
inline double collinearity(const CVector& a, const CVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::abs(a.dot(b)) / (na * nb);
}

inline CVector unit_vector(Eigen::Index n, Eigen::Index k) {
  CVector e = CVector::Zero(n);
  e(k) = 1.0;
  return e;
}

}  // namespace maskbf

#endif  // MASKBF_LINALG_HPP
