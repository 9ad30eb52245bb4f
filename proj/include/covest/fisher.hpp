#pragma once

// Fisher information of the sequence-space model: per-frequency blocks,
// windowed and full sums, the asymptotic limit I(Sigma) and the local
// information of the semiparametric block model.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "covest/block_model.hpp"
#include "covest/errors.hpp"
#include "covest/matcore.hpp"
#include "covest/spectra.hpp"

namespace covest {

/// Parametric experiment Y_p ~ N(0, Sigma lambda_p + eta^2/n I), p >= 1.
struct ParamModel {
  SymMatrix sigma;
  double eta2;
  double n;
  Spectrum spectrum;
  double s_bound;

  ParamModel(SymMatrix sigma_, double eta2_, double n_, Spectrum spectrum_, double s_bound_ = 1e3)
      : sigma(std::move(sigma_)), eta2(eta2_), n(n_), spectrum(std::move(spectrum_)), s_bound(s_bound_) {
    validate();
  }

  Eigen::Index dim() const { return sigma.dim(); }
  double noise() const { return eta2 / n; }
  double eta() const { return std::sqrt(eta2); }

  void validate() const {
    require(eta2 > 0.0, "model: eta^2 must be > 0");
    require(n >= 2.0, "model: n must be >= 2");
    require(s_bound > 0.0, "model: S must be > 0");
    const Vector ev = sigma.eigenvalues();
    require(ev.minCoeff() > 0.0, "model: Sigma must be positive definite");
    require(ev.maxCoeff() < s_bound, "model: Sigma must satisfy Sigma < S I");
  }
};

enum class FisherKind { PerFrequency, Windowed, Asymptotic };

inline std::string to_string(FisherKind k) {
  switch (k) {
    case FisherKind::PerFrequency: return "per-frequency";
    case FisherKind::Windowed: return "windowed";
    case FisherKind::Asymptotic: return "asymptotic";
  }
  return "?";
}

struct FisherInfo {
  Eigen::Index d = 0;
  Matrix info;  // d^2 x d^2, without the symmetriser
  FisherKind kind = FisherKind::PerFrequency;
  bool includes_z = false;
  long long p_lo = 0;  // frequency range summed (windowed / per-frequency)
  long long p_hi = 0;
};

/// Inclusive frequency interval.
struct IndexWindow {
  long long lo = 1;
  long long hi = 1;
  long long size() const { return hi >= lo ? hi - lo + 1 : 0; }
};

inline SymMatrix cov_block(const ParamModel& m, long long p) {
  require(p >= 1, "cov_block: p must be >= 1");
  Matrix c = m.sigma.matrix() * m.spectrum.eigenvalue(p);
  c.diagonal().array() += m.noise();
  return SymMatrix(c);
}

/// (V (x) V) diag(vec D) (V (x) V)^T, the common shape of every information
/// matrix that is diagonal in the eigenbasis V of Sigma.
inline Matrix from_eigen_diagonal(const Matrix& v, const Matrix& dmat) {
  const Matrix vv = kron(v, v);
  return symmetrise(vv * vec(dmat).asDiagonal() * vv.transpose());
}

inline FisherInfo fisher_block(const ParamModel& m, long long p) {
  const SymMatrix c = cov_block(m, p);
  const double lam = m.spectrum.eigenvalue(p);
  const Matrix ci = c.matrix().llt().solve(Matrix::Identity(m.dim(), m.dim()));
  FisherInfo f;
  f.d = m.dim();
  f.info = symmetrise(0.25 * lam * lam * kron(ci, ci));
  f.kind = FisherKind::PerFrequency;
  f.p_lo = f.p_hi = p;
  return f;
}

/// D_ab(p) = lambda^2 / (4 (s_a lambda + e)(s_b lambda + e)), the eigenbasis
/// diagonal of I_np.
inline Matrix fisher_eigen_term(const Vector& s, double lam, double e) {
  const Vector den = (s * lam).array() + e;
  const Vector r = den.cwiseInverse() * lam;
  return 0.25 * r * r.transpose();
}

/// Neumaier-compensated accumulator for d x d sums; ordered, so results are
/// reproducible.
class CompensatedSum {
 public:
  explicit CompensatedSum(Eigen::Index rows, Eigen::Index cols)
      : sum_(Matrix::Zero(rows, cols)), comp_(Matrix::Zero(rows, cols)) {}

  void add(const Matrix& x) {
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double s = sum_(i, j);
        const double v = x(i, j);
        const double t = s + v;
        comp_(i, j) += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
        sum_(i, j) = t;
      }
  }
  Matrix value() const { return sum_ + comp_; }

 private:
  Matrix sum_;
  Matrix comp_;
};

/// Sum of D(p) over p in [lo, hi] for eigenvalues s of Sigma.
inline Matrix fisher_eigen_sum(const Vector& s, const Spectrum& spec, double e, long long lo, long long hi) {
  CompensatedSum acc(s.size(), s.size());
  for (long long p = lo; p <= hi; ++p) acc.add(fisher_eigen_term(s, spec.eigenvalue(p), e));
  return acc.value();
}

inline FisherInfo fisher_window(const ParamModel& m, IndexWindow w) {
  require(w.lo >= 1, "fisher_window: window must start at p >= 1");
  require(w.size() > 0, "fisher_window: empty window");
  const SymEigen eig = sym_eigen(m.sigma);
  FisherInfo f;
  f.d = m.dim();
  f.info = from_eigen_diagonal(eig.vectors, fisher_eigen_sum(eig.values, m.spectrum, m.noise(), w.lo, w.hi));
  f.kind = FisherKind::Windowed;
  f.p_lo = w.lo;
  f.p_hi = w.hi;
  return f;
}

/// Upper bound on sum_{p > P} lambda_p^2 / (4 e^2) by integral comparison,
/// with a 1.5 safety factor covering slowly varying corrections.
inline double fisher_tail_bound(const Spectrum& spec, double e, long long P) {
  const double lam = spec(static_cast<double>(P));
  return 1.5 * 0.25 * lam * lam / (e * e) * static_cast<double>(P) / (2.0 * spec.delta() - 1.0);
}

struct FullSum {
  Matrix dsum;       // eigenbasis diagonal of I_full
  long long p_max;   // truncation index
  double tail_rel;   // tail bound relative to the smallest entry of dsum
};

/// Truncated full sum: P_max = max(64 p_n, 1024), doubled until the analytic
/// tail bound is below `rel_tol` of every entry.
inline FullSum fisher_full_eigen(const Vector& s, const Spectrum& spec, double e, double n,
                                 double rel_tol = 1e-8) {
  const double pn = balance_index(spec, n);
  long long P = std::max<long long>(1024, static_cast<long long>(std::ceil(64.0 * pn)));
  CompensatedSum acc(s.size(), s.size());
  long long done = 0;
  for (;;) {
    for (long long p = done + 1; p <= P; ++p) acc.add(fisher_eigen_term(s, spec.eigenvalue(p), e));
    done = P;
    const Matrix cur = acc.value();
    const double rel = fisher_tail_bound(spec, e, P) / cur.minCoeff();
    if (rel < rel_tol) return {cur, P, rel};
    if (P > (1LL << 40)) throw NumericalError("fisher: full-sum truncation did not converge");
    P *= 2;
  }
}

inline long long full_truncation(const ParamModel& m, double rel_tol = 1e-8) {
  return fisher_full_eigen(m.sigma.eigenvalues(), m.spectrum, m.noise(), m.n, rel_tol).p_max;
}

inline FisherInfo fisher_full(const ParamModel& m, double rel_tol = 1e-8) {
  const SymEigen eig = sym_eigen(m.sigma);
  const FullSum fs = fisher_full_eigen(eig.values, m.spectrum, m.noise(), m.n, rel_tol);
  FisherInfo f;
  f.d = m.dim();
  f.info = from_eigen_diagonal(eig.vectors, fs.dsum);
  f.kind = FisherKind::Windowed;
  f.p_lo = 1;
  f.p_hi = fs.p_max;
  return f;
}

enum class AsymptoticMode {
  ClosedForm,    // Beta-function closed form
  Quadrature,    // adaptive Gauss-Kronrod over (0, inf)
  UnitInterval,  // quadrature over (0, 1] only; for comparison
};

namespace detail {

// int_0^inf (s_i + x^delta)^{-1} (s_j + x^delta)^{-1} dx in closed form.
inline double eigen_integral_closed(double si, double sj, double delta) {
  using std::numbers::pi;
  const double pref = pi / (delta * std::sin(pi / delta));
  const double a = 1.0 / delta - 1.0;
  if (std::abs(si - sj) < 1e-8 * std::max(si, sj)) {
    const double s = std::sqrt(si * sj);
    return pref * (1.0 - 1.0 / delta) * std::pow(s, 1.0 / delta - 2.0);
  }
  // (s_j^a - s_i^a)/(s_i - s_j) written through expm1 to avoid cancellation.
  const double u = std::log(sj / si);
  return pref * std::pow(si, a - 1.0) * std::expm1(a * u) / -std::expm1(u);
}

inline double eigen_integral_quad(double si, double sj, double delta, double upper) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double x) {
    const double xd = std::pow(x, delta);
    return 1.0 / ((si + xd) * (sj + xd));
  };
  const double tol = 1e-13;
  if (std::isfinite(upper)) {
    // Only the bounded variant; the integrand is smooth on (0, upper].
    return gauss_kronrod<double, 61>::integrate(f, 0.0, upper, 12, tol);
  }
  // Geometric panels around the feature scale, then the analytic tail.
  const double smax = std::max(si, sj);
  const double scale = std::pow(std::min(si, sj), 1.0 / delta);
  const double lower_bound = std::pow(smax, 1.0 / delta) / (4.0 * smax * smax);
  const double q = 2.0 * delta - 1.0;
  const double x_end = std::max(8.0 * std::pow(smax, 1.0 / delta),
                                std::pow(1.0 / (1e-15 * lower_bound * q), 1.0 / q));
  double total = gauss_kronrod<double, 61>::integrate(f, 0.0, 1e-3 * scale, 12, tol);
  double a = 1e-3 * scale;
  while (a < x_end) {
    const double b = std::min(4.0 * a, x_end);
    total += gauss_kronrod<double, 61>::integrate(f, a, b, 12, tol);
    a = b;
  }
  return total + std::pow(x_end, -q) / q;
}

}  // namespace detail

/// v_ij = zeta / (4 eta^{2/delta}) int (s_i + x^delta)^{-1} (s_j + x^delta)^{-1} dx.
inline double asymptotic_eigenvalue(double si, double sj, double delta, double zeta, double eta,
                                    AsymptoticMode mode = AsymptoticMode::ClosedForm) {
  require(delta > 1.0, "asymptotic_fisher: delta must be > 1");
  require(si > 0.0 && sj > 0.0, "asymptotic_fisher: Sigma must be positive definite");
  require(eta > 0.0 && zeta > 0.0, "asymptotic_fisher: eta and zeta must be > 0");
  double integral = 0.0;
  switch (mode) {
    case AsymptoticMode::ClosedForm: integral = detail::eigen_integral_closed(si, sj, delta); break;
    case AsymptoticMode::Quadrature:
      integral = detail::eigen_integral_quad(si, sj, delta, std::numeric_limits<double>::infinity());
      break;
    case AsymptoticMode::UnitInterval: integral = detail::eigen_integral_quad(si, sj, delta, 1.0); break;
  }
  return zeta / (4.0 * std::pow(eta, 2.0 / delta)) * integral;
}

inline FisherInfo asymptotic_fisher(const SymMatrix& sigma, double delta, double zeta, double eta,
                                    AsymptoticMode mode = AsymptoticMode::ClosedForm) {
  require(delta > 1.0, "asymptotic_fisher: delta must be > 1");
  const SymEigen eig = sym_eigen(sigma);
  if (!(eig.values.minCoeff() > 0.0)) throw ValidationError("asymptotic_fisher: Sigma is singular");
  const Eigen::Index d = sigma.dim();
  Matrix v(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i <= j; ++i)
      v(i, j) = v(j, i) = asymptotic_eigenvalue(eig.values(i), eig.values(j), delta, zeta, eta, mode);
  FisherInfo f;
  f.d = d;
  f.info = from_eigen_diagonal(eig.vectors, v);
  f.kind = FisherKind::Asymptotic;
  return f;
}

/// 1/4 I^{-1} Z for an information matrix of the (V (x) V) diag (V (x) V)^T shape.
inline Matrix quarter_inverse_z(const Matrix& info) {
  const Eigen::Index d2 = info.rows();
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(d2))));
  Eigen::LDLT<Matrix> ldlt(info);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
    throw NumericalError("Fisher information is not invertible");
  return symmetrise(0.25 * ldlt.solve(symmetriser(d).z));
}

/// 1/4 grad I(Sigma)^{-1} Z grad^T.
inline Matrix optimal_covariance(const SymMatrix& sigma, double delta, double zeta, double eta,
                                 const Matrix& grad) {
  const Eigen::Index d = sigma.dim();
  require(grad.cols() == d * d, "optimal_covariance: gradient must have d^2 columns");
  const Matrix base = quarter_inverse_z(asymptotic_fisher(sigma, delta, zeta, eta).info);
  return symmetrise(grad * base * grad.transpose());
}

inline Matrix optimal_covariance(const SymMatrix& sigma, double delta, double zeta, double eta) {
  const Eigen::Index d = sigma.dim();
  return optimal_covariance(sigma, delta, zeta, eta, Matrix::Identity(d * d, d * d));
}

namespace detail {
inline Vector diagonal_of(const SymMatrix& xi) {
  const Matrix& x = xi.matrix();
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      require(i == j || x(i, j) == 0.0, "Xi must be diagonal");
  const Vector dg = x.diagonal();
  require(dg.minCoeff() > 0.0, "Xi must have positive diagonal");
  return dg;
}
}  // namespace detail

/// Xi (Xi^{-1} Sigma Xi^{-1})^{1/2} Xi.
inline SymMatrix sigma_xi_sqrt(const SymMatrix& sigma, const SymMatrix& xi) {
  require(sigma.dim() == xi.dim(), "sigma_xi_sqrt: dimension mismatch");
  const Vector x = detail::diagonal_of(xi);
  const Vector xinv = x.cwiseInverse();
  const SymMatrix inner = SymMatrix::from_symmetrised(xinv.asDiagonal() * sigma.matrix() * xinv.asDiagonal());
  return SymMatrix::from_symmetrised(x.asDiagonal() * psd_sqrt(inner).matrix() * x.asDiagonal());
}

struct LocalFisher {
  double t = 0.0;
  SymMatrix sigma;
  SymMatrix xi;
  Matrix info;
  Matrix info_inv;
};

/// I_Sigma^{-1}(t) = 8 (Sigma_Xi^{1/2} (x) Sigma + Sigma (x) Sigma_Xi^{1/2}).
inline LocalFisher local_fisher(const SymMatrix& sigma, const SymMatrix& xi, double t = 0.0) {
  require(sigma.is_positive_definite(), "local_fisher: Sigma must be positive definite");
  const SymMatrix r = sigma_xi_sqrt(sigma, xi);
  LocalFisher lf;
  lf.t = t;
  lf.sigma = sigma;
  lf.xi = xi;
  lf.info_inv = symmetrise(8.0 * (kron(r.matrix(), sigma.matrix()) + kron(sigma.matrix(), r.matrix())));
  Eigen::LLT<Matrix> llt(lf.info_inv);
  if (llt.info() != Eigen::Success) throw NumericalError("local_fisher: singular local information");
  lf.info = symmetrise(llt.solve(Matrix::Identity(lf.info_inv.rows(), lf.info_inv.cols())));
  return lf;
}

inline SymMatrix xi_matrix(const Vector& xi2) {
  return SymMatrix(Matrix(xi2.cwiseSqrt().asDiagonal()));
}

/// (1/m) sum_k 1/4 grad_k I_Sigma^{-1}(k/m) Z grad_k^T.
inline Matrix integrated_bound(const BlockModel& bm, const std::function<Matrix(int)>& grad) {
  bm.validate();
  const Eigen::Index d = bm.dim();
  const Matrix z = symmetriser(d).z;
  Matrix acc;
  for (int k = 0; k < bm.m; ++k) {
    const LocalFisher lf = local_fisher(bm.sigma[static_cast<std::size_t>(k)],
                                        xi_matrix(bm.xi2[static_cast<std::size_t>(k)]),
                                        static_cast<double>(k) / bm.m);
    const Matrix g = grad(k);
    require(g.cols() == d * d, "integrated_bound: gradient must have d^2 columns");
    const Matrix term = 0.25 * g * lf.info_inv * z * g.transpose();
    if (k == 0) acc = term;
    else acc += term;
  }
  return symmetrise(acc / bm.m);
}

inline Matrix integrated_bound(const BlockModel& bm) {
  const Eigen::Index d = bm.dim();
  return integrated_bound(bm, [d](int) { return Matrix(Matrix::Identity(d * d, d * d)); });
}

}  // namespace covest
