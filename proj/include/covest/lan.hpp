#pragma once

// Gaussian log-likelihood ratios of the sequence model, LAN diagnostics,
// Hellinger bounds and equivalence / window diagnostics.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "covest/errors.hpp"
#include "covest/fisher.hpp"
#include "covest/matcore.hpp"
#include "covest/parallel.hpp"
#include "covest/rng.hpp"
#include "covest/simulate.hpp"
#include "covest/spectra.hpp"

namespace covest {

/// log dP_{Sigma'}/dP_Sigma of Y_1..Y_P, precomputed per frequency:
/// sum_p -1/2 log det(C'_p C_p^{-1}) - 1/2 Y_p^T (C'^{-1}_p - C_p^{-1}) Y_p.
class LogLikRatio {
 public:
  LogLikRatio(const SymMatrix& sigma, const SymMatrix& sigma_alt, const Spectrum& spec, double e, long long p_max)
      : p_max_(p_max) {
    require(sigma.dim() == sigma_alt.dim(), "loglik_ratio: dimension mismatch");
    require(sigma.is_positive_definite() && sigma_alt.is_positive_definite(),
            "loglik_ratio: Sigma and Sigma_alt must be positive definite");
    require(p_max >= 1, "loglik_ratio: P_max must be >= 1");
    const Eigen::Index d = sigma.dim();
    const Matrix h = sigma_alt.matrix() - sigma.matrix();
    const Matrix id = Matrix::Identity(d, d);
    a_.resize(static_cast<std::size_t>(p_max));
    double cst = 0.0;
    double mean = 0.0;
    double var = 0.0;
    for (long long p = 1; p <= p_max; ++p) {
      const double lam = spec.eigenvalue(p);
      Matrix c = sigma.matrix() * lam;
      c.diagonal().array() += e;
      Matrix ca = sigma_alt.matrix() * lam;
      ca.diagonal().array() += e;
      Eigen::LLT<Matrix> lc(c);
      Eigen::LLT<Matrix> la(ca);
      if (lc.info() != Eigen::Success || la.info() != Eigen::Success)
        throw NumericalError("loglik_ratio: covariance block lost definiteness");
      // log det(I + L^{-1} lambda H L^{-T}) via log1p of its eigenvalues.
      Matrix m = lc.matrixL().solve(lam * h);
      m = lc.matrixL().solve(m.transpose()).transpose();
      const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(symmetrise(m), Eigen::EigenvaluesOnly).eigenvalues();
      double logdet = 0.0;
      for (Eigen::Index i = 0; i < ev.size(); ++i) logdet += std::log1p(ev(i));
      // C'^{-1} - C^{-1} = -C'^{-1} (lambda H) C^{-1}.
      const Matrix ap = symmetrise(-la.solve(lam * h * lc.solve(id)));
      const Matrix ac = ap * c;
      cst += -0.5 * logdet;
      mean += -0.5 * logdet - 0.5 * ac.trace();
      var += 0.5 * (ac * ac).trace();
      a_[static_cast<std::size_t>(p - 1)] = ap;
    }
    const_ = cst;
    mean_ = mean;
    var_ = var;
  }

  double operator()(const Matrix& y) const {
    require(y.cols() >= p_max_, "loglik_ratio: sample has fewer frequencies than the evaluator");
    double q = 0.0;
    for (long long p = 0; p < p_max_; ++p) q += quad_form(a_[static_cast<std::size_t>(p)], y, p);
    return const_ - 0.5 * q;
  }

  /// y_p^T a y_p without temporaries.
  static double quad_form(const Matrix& a, const Matrix& y, long long p) {
    const Eigen::Index d = a.rows();
    const double* v = y.data() + static_cast<Eigen::Index>(p) * y.rows();
    double q = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      double row = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) row += a(i, j) * v[i];
      q += row * v[j];
    }
    return q;
  }

  /// Exact mean and variance under P_Sigma.
  double exact_mean() const { return mean_; }
  double exact_variance() const { return var_; }
  long long p_max() const { return p_max_; }

 private:
  long long p_max_;
  std::vector<Matrix> a_;
  double const_ = 0.0;
  double mean_ = 0.0;
  double var_ = 0.0;
};

inline double loglik_ratio(const SeqSample& s, const SymMatrix& sigma, const SymMatrix& sigma_alt) {
  return LogLikRatio(sigma, sigma_alt, s.model.spectrum, s.model.noise(), s.p_max)(s.values);
}

/// Frequencies needed so that omitted log-LR terms are negligible; reuses the
/// Fisher tail bound of the model.
inline long long lan_truncation(const ParamModel& m, double rel_tol = 1e-8) { return full_truncation(m, rel_tol); }

struct LanReport {
  double n = 0;
  Matrix h;
  long long replications = 0;
  long long p_max = 0;
  double r_n = 0;
  double mean = 0;
  double variance = 0;
  double mean_se = 0;
  double cv_mean = 0;        // control-variate adjusted mean
  double exact_mean = 0;     // finite-n expectation under P_Sigma
  double exact_variance = 0;
  double target_mean = 0;    // -1/2 |H|^2_{I Z}
  double target_variance = 0;
  double lan_gap = 0;        // |mean + variance / 2| / (variance / 2)
  std::vector<double> values;
};

inline double h_norm_iz(const SymMatrix& sigma, const Matrix& h, const Spectrum& spec, double eta) {
  const FisherInfo f = asymptotic_fisher(sigma, spec.delta(), spec.zeta_limit(), eta);
  const Vector vh = vec(h);
  return vh.dot(f.info * symmetriser(sigma.dim()).z * vh);
}

inline LanReport lan_diagnostic(const SymMatrix& sigma, const Matrix& h, double n, const Spectrum& spec, long long reps,
                                std::uint64_t master_seed, double eta2 = 1.0, unsigned threads = 1) {
  require(reps >= 1, "lan: R must be >= 1");
  require(h.rows() == sigma.dim() && h.cols() == sigma.dim(), "lan: H must be d x d");
  const ParamModel model(sigma, eta2, n, spec, std::numeric_limits<double>::max());
  const double rn = std::pow(n, -0.5 / spec.delta());
  const Matrix alt = sigma.matrix() + rn * symmetrise(h);
  const SymMatrix sigma_alt = SymMatrix::from_symmetrised(alt);
  require(sigma_alt.is_positive_definite(), "lan: Sigma + r_n H must be positive definite");

  LanReport rep;
  rep.n = n;
  rep.h = h;
  rep.replications = reps;
  rep.r_n = rn;
  rep.p_max = lan_truncation(model);
  const double v = h_norm_iz(sigma, symmetrise(h), spec, std::sqrt(eta2));
  rep.target_mean = -0.5 * v;
  rep.target_variance = v;

  const LogLikRatio llr(sigma, sigma_alt, spec, model.noise(), rep.p_max);
  rep.exact_mean = llr.exact_mean();
  rep.exact_variance = llr.exact_variance();

  // Control variate with known mean zero: sum_p (Y_p^T C_p^{-1} Y_p - d).
  std::vector<Matrix> cinv(static_cast<std::size_t>(rep.p_max));
  for (long long p = 1; p <= rep.p_max; ++p)
    cinv[static_cast<std::size_t>(p - 1)] = cov_block(model, p).matrix().inverse();

  rep.values.assign(static_cast<std::size_t>(reps), 0.0);
  std::vector<double> cv(static_cast<std::size_t>(reps), 0.0);
  const double d = static_cast<double>(sigma.dim());
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    RngStream rng(master_seed, r, 0, Purpose::Signal);
    const SeqSample s = sample_sequence(model, rep.p_max, rng);
    rep.values[r] = llr(s.values);
    double w = 0.0;
    for (long long p = 0; p < rep.p_max; ++p)
      w += LogLikRatio::quad_form(cinv[static_cast<std::size_t>(p)], s.values, p) - d;
    cv[r] = w;
  });

  const double rr = static_cast<double>(reps);
  double ml = 0.0;
  double mw = 0.0;
  for (std::size_t i = 0; i < rep.values.size(); ++i) {
    ml += rep.values[i];
    mw += cv[i];
  }
  ml /= rr;
  mw /= rr;
  double sll = 0.0;
  double sww = 0.0;
  double slw = 0.0;
  for (std::size_t i = 0; i < rep.values.size(); ++i) {
    sll += (rep.values[i] - ml) * (rep.values[i] - ml);
    sww += (cv[i] - mw) * (cv[i] - mw);
    slw += (rep.values[i] - ml) * (cv[i] - mw);
  }
  rep.mean = ml;
  rep.variance = reps > 1 ? sll / (rr - 1.0) : 0.0;
  rep.mean_se = std::sqrt(rep.variance / rr);
  rep.cv_mean = sww > 0.0 ? ml - (slw / sww) * mw : ml;
  rep.lan_gap = rep.variance > 0.0 ? std::abs(rep.mean + 0.5 * rep.variance) / (0.5 * rep.variance) : 0.0;
  return rep;
}

/// 4 |Sigma1^{-1/2}(mu1 - mu2)|^2 + 1/2 |Sigma1^{-1/2}(Sigma2 - Sigma1)Sigma1^{-1/2}|_F^2.
inline double hellinger_bound_gauss(const Vector& mu1, const SymMatrix& s1, const Vector& mu2, const SymMatrix& s2) {
  require(mu1.size() == s1.dim() && mu2.size() == s1.dim() && s2.dim() == s1.dim(),
          "hellinger_bound: dimension mismatch");
  if (!s1.is_positive_definite()) throw ValidationError("hellinger_bound: Sigma1 is singular");
  const Matrix r = pd_inv_sqrt(s1).matrix();
  const double shift = (r * (mu1 - mu2)).squaredNorm();
  const double scale = (r * (s2.matrix() - s1.matrix()) * r).squaredNorm();
  return 4.0 * shift + 0.5 * scale;
}

/// How the second experiment's coordinates are mapped before comparison.
enum class DistanceKernel {
  Identity,  // Y'_p compared as is
  Rescale,   // Y'_p scaled by sqrt(lambda_p / lambda'_p)
  Best,      // per-frequency minimum of the two
};

inline std::string to_string(DistanceKernel k) {
  switch (k) {
    case DistanceKernel::Identity: return "identity";
    case DistanceKernel::Rescale: return "rescale";
    case DistanceKernel::Best: return "best";
  }
  return "?";
}

inline DistanceKernel parse_distance_kernel(const std::string& s) {
  if (s == "identity") return DistanceKernel::Identity;
  if (s == "rescale") return DistanceKernel::Rescale;
  if (s == "best") return DistanceKernel::Best;
  throw ValidationError("equiv: unknown kernel '" + s + "' (identity|rescale|best)");
}

struct DistancePoint {
  double n = 0;
  long long p_max = 0;
  double identity = 0;
  double rescale = 0;
  double best = 0;

  double value(DistanceKernel k) const {
    switch (k) {
      case DistanceKernel::Identity: return identity;
      case DistanceKernel::Rescale: return rescale;
      case DistanceKernel::Best: return best;
    }
    return best;
  }
};

struct DistanceTrend {
  std::string spec1;
  std::string spec2;
  DistanceKernel kernel = DistanceKernel::Best;
  std::vector<DistancePoint> points;
  std::string verdict;  // vanishing | diverging | inconclusive
};

/// Sum over p of the Hellinger covariance term between N(0, C_p) and the
/// (mapped) N(0, C'_p), for one n.
inline DistancePoint spectrum_distance(const Spectrum& a, const Spectrum& b, const SymMatrix& sigma, double eta,
                                       double n) {
  require(sigma.is_positive_definite(), "equiv: Sigma must be positive definite");
  require(eta > 0.0 && n >= 2.0, "equiv: need eta > 0 and n >= 2");
  const double e = eta * eta / n;
  const SymEigen eig = sym_eigen(sigma);
  const Vector& s = eig.values;
  // In the eigenbasis of Sigma every C_p is diagonal: c_i = s_i lambda + e.
  auto terms = [&](long long p, double& ti, double& tr) {
    const double la = a.eigenvalue(p);
    const double lb = b.eigenvalue(p);
    const double ratio = la / lb;
    ti = 0.0;
    tr = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double c = s(i) * la + e;
      const double di = s(i) * (lb - la) / c;      // C^{-1/2}(C' - C)C^{-1/2}
      const double dr = (ratio - 1.0) * e / c;      // after rescaling Y'_p
      ti += 0.5 * di * di;
      tr += 0.5 * dr * dr;
    }
  };
  const double pn = std::max(balance_index(a, n), balance_index(b, n));
  long long P = std::max<long long>(1024, static_cast<long long>(std::ceil(64.0 * pn)));
  double si = 0.0;
  double sr = 0.0;
  double sb = 0.0;
  long long done = 0;
  for (;;) {
    double ci = 0.0;
    double cr = 0.0;
    double cb = 0.0;
    for (long long p = done + 1; p <= P; ++p) {
      double ti = 0.0;
      double tr = 0.0;
      terms(p, ti, tr);
      ci += ti;
      cr += tr;
      cb += std::min(ti, tr);
    }
    si += ci;
    sr += cr;
    sb += cb;
    done = P;
    // Stop once the last doubling changed the identity and best aggregates by
    // < 1e-8. The rescaled terms tend to d (lambda/lambda' - 1)^2 / 2 and are
    // reported as truncated at P.
    const bool small = ci <= 1e-8 * si && cb <= 1e-8 * sb;
    if (small || P > (1LL << 33)) break;
    P *= 2;
  }
  return {n, P, si, sr, sb};
}

inline DistanceTrend spectrum_distance_trend(const Spectrum& a, const Spectrum& b, const SymMatrix& sigma, double eta,
                                             const std::vector<double>& n_list,
                                             DistanceKernel kernel = DistanceKernel::Best) {
  require(!n_list.empty(), "equiv: n list must not be empty");
  DistanceTrend t;
  t.spec1 = a.name();
  t.spec2 = b.name();
  t.kernel = kernel;
  for (double n : n_list) t.points.push_back(spectrum_distance(a, b, sigma, eta, n));
  bool dec = true;
  bool inc = true;
  for (std::size_t i = 1; i < t.points.size(); ++i) {
    const double prev = t.points[i - 1].value(kernel);
    const double cur = t.points[i].value(kernel);
    dec = dec && cur < prev;
    inc = inc && cur > prev;
  }
  const bool zero = t.points.back().value(kernel) == 0.0;
  t.verdict = zero ? "vanishing" : dec ? "vanishing" : inc ? "diverging" : "inconclusive";
  return t;
}

/// trace(I_window) / trace(I_full), both evaluated in the eigenbasis of Sigma.
inline double window_information_fraction(const ParamModel& m, IndexWindow w) {
  require(w.lo >= 1 && w.size() > 0, "window_information_fraction: empty window");
  const Vector s = m.sigma.eigenvalues();
  const FullSum full = fisher_full_eigen(s, m.spectrum, m.noise(), m.n);
  const long long hi = std::min(w.hi, full.p_max);
  if (hi < w.lo) return 0.0;
  const Matrix part = fisher_eigen_sum(s, m.spectrum, m.noise(), w.lo, hi);
  return std::min(1.0, part.sum() / full.dsum.sum());
}

}  // namespace covest
