#pragma once

// Dense symmetric-matrix algebra shared by every other module.
//
// Convention: vec() stacks columns. Every d^2-indexed object in the library
// (Fisher matrices, estimates, Kronecker products, the symmetriser) uses this
// single ordering, which is also Eigen's native column-major storage.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "covest/errors.hpp"

namespace covest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix mat(const Vector& v, Eigen::Index d) {
  require(d >= 1 && v.size() == d * d,
          "mat: vector of length " + std::to_string(v.size()) + " is not d^2 for d=" +
              std::to_string(d));
  return Eigen::Map<const Matrix>(v.data(), d, d);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Matrix symmetrise(const Matrix& m) {
  Matrix s = 0.5 * (m + m.transpose());
  // The average is symmetric up to rounding of a+b vs b+a, which IEEE makes exact.
  return s;
}

/// A d x d real matrix whose stored entries are exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(Matrix m) : m_(std::move(m)) {
    require(m_.rows() == m_.cols() && m_.rows() >= 1, "SymMatrix: matrix must be square");
    for (Eigen::Index j = 0; j < m_.cols(); ++j)
      for (Eigen::Index i = j + 1; i < m_.rows(); ++i)
        require(m_(i, j) == m_(j, i), "SymMatrix: entries are not symmetric");
  }

  /// Builds from an almost-symmetric matrix by averaging with its transpose.
  static SymMatrix from_symmetrised(const Matrix& m) {
    require(m.rows() == m.cols(), "SymMatrix: matrix must be square");
    return SymMatrix(symmetrise(m));
  }

  static SymMatrix identity(Eigen::Index d) { return SymMatrix(Matrix::Identity(d, d)); }
  static SymMatrix scalar(double v) { return SymMatrix(Matrix::Constant(1, 1, v)); }

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  Vector eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  bool is_positive_definite(double tol = 0.0) const { return eigenvalues().minCoeff() > tol; }

 private:
  Matrix m_;
};

/// Spectral decomposition S = V diag(s) V^T with ascending s.
struct SymEigen {
  Vector values;
  Matrix vectors;
};

inline SymEigen sym_eigen(const SymMatrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.matrix());
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Z with Z vec(A) = vec(A + A^T); equivalently Cov(vec(g g^T)) for g ~ N(0, I_d).
struct Symmetriser {
  Eigen::Index d = 0;
  Matrix z;
};

/// Commutation matrix K with K vec(A) = vec(A^T).
inline Matrix commutation(Eigen::Index d) {
  Matrix k = Matrix::Zero(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) k(i + j * d, j + i * d) = 1.0;
  return k;
}

inline Symmetriser symmetriser(Eigen::Index d) {
  require(d >= 1, "symmetriser: d must be >= 1");
  return {d, Matrix::Identity(d * d, d * d) + commutation(d)};
}

/// Symmetric PSD square root via eigendecomposition; eigenvalues within
/// `rel_clamp * max eigenvalue` of zero (either sign) are set to zero.
inline SymMatrix psd_sqrt(const SymMatrix& s, double rel_clamp = 1e-12) {
  const SymEigen e = sym_eigen(s);
  const double top = std::max(e.values.cwiseAbs().maxCoeff(), 0.0);
  const double clamp = rel_clamp * top;
  Vector r(e.values.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double v = e.values(i);
    if (v < -clamp)
      throw ValidationError("psd_sqrt: matrix is not positive semi-definite (eigenvalue " +
                            std::to_string(v) + ")");
    r(i) = v <= clamp ? 0.0 : std::sqrt(v);
  }
  return SymMatrix::from_symmetrised(e.vectors * r.asDiagonal() * e.vectors.transpose());
}

/// S^{-1/2} for positive definite S.
inline SymMatrix pd_inv_sqrt(const SymMatrix& s) {
  const SymEigen e = sym_eigen(s);
  if (!(e.values.minCoeff() > 0.0))
    throw ValidationError("inverse square root: matrix is not positive definite");
  Vector r = e.values.cwiseSqrt().cwiseInverse();
  return SymMatrix::from_symmetrised(e.vectors * r.asDiagonal() * e.vectors.transpose());
}

/// <A, B>_C = vec(A)^T C vec(B).
inline double inner_weighted(const Matrix& a, const Matrix& b, const Matrix& c) {
  require(a.rows() == a.cols() && a.rows() == b.rows() && b.rows() == b.cols(),
          "inner_weighted: A and B must be square of equal size");
  require(c.rows() == a.size() && c.cols() == a.size(),
          "inner_weighted: weight must be d^2 x d^2");
  return vec(a).dot(c * vec(b));
}

inline double rel_frobenius(const Matrix& a, const Matrix& ref) {
  return (a - ref).norm() / ref.norm();
}

}  // namespace covest
