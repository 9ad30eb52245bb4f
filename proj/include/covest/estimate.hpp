#pragma once

// Spectral estimators of vec(Sigma): per-frequency, oracle, pre- and adaptive
// estimates, noise whitening and the block-wise integrated covolatility
// estimator.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "covest/block_model.hpp"
#include "covest/errors.hpp"
#include "covest/fisher.hpp"
#include "covest/matcore.hpp"
#include "covest/simulate.hpp"
#include "covest/spectra.hpp"

namespace covest {

/// How the window is split between pre-estimation and the main estimate.
enum class SplitMode {
  None,      // one index set; the pre-estimate reuses the main data
  Parity,    // main = even indices, pre-window = odd indices
  CrossFit,  // average of (even | odd pre) and (odd | even pre)
};

inline std::string to_string(SplitMode s) {
  switch (s) {
    case SplitMode::None: return "none";
    case SplitMode::Parity: return "parity";
    case SplitMode::CrossFit: return "crossfit";
  }
  return "?";
}

inline SplitMode parse_split(const std::string& s) {
  if (s == "none") return SplitMode::None;
  if (s == "parity") return SplitMode::Parity;
  if (s == "crossfit") return SplitMode::CrossFit;
  throw ValidationError("window: unknown split mode '" + s + "' (none|parity|crossfit)");
}

/// Window [a p_n, b p_n]. Non-positive a or b select the defaults
/// a = 1/ln(n)^2, b = ln(n).
struct WindowConfig {
  double a = 0.0;
  double b = 0.0;
  SplitMode split = SplitMode::CrossFit;

  double a_for(double n) const { return a > 0.0 ? a : 1.0 / (std::log(n) * std::log(n)); }
  double b_for(double n) const { return b > 0.0 ? b : std::log(n); }

  void validate() const {
    require(a <= 0.0 || a < 1.0, "window: a must lie in (0, 1)");
    require(b <= 0.0 || b > 1.0, "window: b must be > 1");
  }

  /// Integer window around `centre`, clipped to [1, p_cap].
  IndexWindow resolve(double centre, double n, long long p_cap = std::numeric_limits<long long>::max()) const {
    validate();
    const long long lo = std::max<long long>(1, static_cast<long long>(std::ceil(a_for(n) * centre)));
    const long long hi = std::min<long long>(p_cap, static_cast<long long>(std::floor(b_for(n) * centre)));
    return {lo, hi};
  }
};

/// Arithmetic progression lo, lo + step, ..., <= hi.
struct IndexSet {
  long long lo = 1;
  long long hi = 0;
  long long step = 1;

  long long size() const { return hi >= lo ? (hi - lo) / step + 1 : 0; }

  static IndexSet all(IndexWindow w) { return {w.lo, w.hi, 1}; }
  static IndexSet even(IndexWindow w) { return {w.lo + (w.lo % 2), w.hi, 2}; }
  static IndexSet odd(IndexWindow w) { return {w.lo + 1 - (w.lo % 2), w.hi, 2}; }
};

struct EstimateDiagnostics {
  int clamp_events = 0;        // pre-estimates whose eigenvalues were projected
  long long occupancy = 0;     // frequencies entering the main estimate
  long long pre_occupancy = 0; // frequencies entering the pre-estimate
};

struct EstimateReport {
  Vector estimate;       // vec of the symmetrised estimate
  IndexWindow window;
  SplitMode split = SplitMode::None;
  Matrix pre_estimate;   // d x d, empty for the oracle
  Matrix covariance;     // plug-in 1/4 I^{-1} Z
  EstimateDiagnostics diagnostics;

  Matrix matrix() const {
    const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(estimate.size()))));
    return mat(estimate, d);
  }
};

/// theta_p = lambda_p^{-1} vec(Y_p Y_p^T - eta^2/n I).
inline Vector per_freq_estimate(const Vector& y, double lambda, double eta2, double n) {
  require(lambda > 0.0, "per_freq_estimate: lambda_p must be > 0");
  Matrix m = y * y.transpose();
  m.diagonal().array() -= eta2 / n;
  return vec(m / lambda);
}

/// Result of sum_p W_p(Sigma_w) theta_p over an index set, carried out in the
/// eigenbasis of the weight argument Sigma_w.
struct WeightedResult {
  Matrix estimate;  // d x d, symmetric
  Matrix info;      // I_set(Sigma_w), d^2 x d^2
};

inline WeightedResult weighted_estimate(const Matrix& y, const Spectrum& spec, double e, const SymMatrix& sigma_w,
                                        const IndexSet& set) {
  require(set.size() > 0, "estimate: empty effective window");
  require(set.lo >= 1 && set.hi <= y.cols(), "estimate: window exceeds the available frequencies");
  const SymEigen eig = sym_eigen(sigma_w);
  const Eigen::Index d = y.rows();
  const auto du = static_cast<std::size_t>(d);
  // Upper-triangle accumulators with Neumaier compensation; plain loops keep
  // the per-frequency work free of allocations.
  const std::size_t np = du * (du + 1) / 2;
  std::vector<double> num(np, 0.0), num_c(np, 0.0), den(np, 0.0), den_c(np, 0.0);
  std::vector<double> u(du), r(du);
  auto add = [](double& sum, double& comp, double v) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  };
  const Matrix vt = eig.vectors.transpose();
  for (long long p = set.lo; p <= set.hi; p += set.step) {
    const double lam = spec.eigenvalue(p);
    const double* yp = y.data() + (p - 1) * d;
    for (Eigen::Index a = 0; a < d; ++a) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) acc += vt(a, k) * yp[k];
      u[static_cast<std::size_t>(a)] = acc;
      r[static_cast<std::size_t>(a)] = lam / (eig.values(a) * lam + e);
    }
    std::size_t idx = 0;
    for (std::size_t b = 0; b < du; ++b)
      for (std::size_t a = 0; a <= b; ++a, ++idx) {
        const double dp = 0.25 * r[a] * r[b];
        const double t = u[a] * u[b] - (a == b ? e : 0.0);
        add(num[idx], num_c[idx], dp * t / lam);
        add(den[idx], den_c[idx], dp);
      }
  }
  Matrix est_eig(d, d);
  Matrix dsum(d, d);
  std::size_t idx = 0;
  for (Eigen::Index b = 0; b < d; ++b)
    for (Eigen::Index a = 0; a <= b; ++a, ++idx) {
      dsum(a, b) = dsum(b, a) = den[idx] + den_c[idx];
      est_eig(a, b) = est_eig(b, a) = (num[idx] + num_c[idx]) / dsum(a, b);
    }
  return {symmetrise(eig.vectors * est_eig * eig.vectors.transpose()), from_eigen_diagonal(eig.vectors, dsum)};
}

/// Explicit weight matrices W_p = I_set^{-1} I_np for inspection.
inline std::vector<Matrix> oracle_weights(const ParamModel& model, const IndexSet& set) {
  const Eigen::Index d = model.dim();
  Matrix total = Matrix::Zero(d * d, d * d);
  std::vector<Matrix> blocks;
  for (long long p = set.lo; p <= set.hi; p += set.step) {
    blocks.push_back(fisher_block(model, p).info);
    total += blocks.back();
  }
  Eigen::LDLT<Matrix> ldlt(total);
  for (auto& b : blocks) b = ldlt.solve(b);
  return blocks;
}

inline double balance_centre(const ParamModel& m) { return balance_index(m.spectrum, m.n); }

/// Index set used by the oracle for a given split mode.
inline IndexSet main_set(IndexWindow w, SplitMode split) {
  return split == SplitMode::Parity ? IndexSet::even(w) : IndexSet::all(w);
}

inline IndexWindow effective_window(const SeqSample& s, const WindowConfig& cfg) {
  const IndexWindow w = cfg.resolve(balance_centre(s.model), s.model.n, s.p_max);
  require(w.size() > 0, "estimate: empty effective window after intersection with [1, P_max]");
  return w;
}

inline EstimateReport oracle_estimate(const SeqSample& s, const SymMatrix& sigma_true, const WindowConfig& cfg) {
  const IndexWindow w = effective_window(s, cfg);
  const IndexSet set = main_set(w, cfg.split);
  const WeightedResult r = weighted_estimate(s.values, s.model.spectrum, s.model.noise(), sigma_true, set);
  EstimateReport rep;
  rep.estimate = vec(r.estimate);
  rep.window = w;
  rep.split = cfg.split;
  rep.covariance = quarter_inverse_z(r.info);
  rep.diagnostics.occupancy = set.size();
  return rep;
}

/// Projects the eigenvalues of a symmetric matrix into [lo, hi].
inline SymMatrix clamp_eigenvalues(const Matrix& m, double lo, double hi, bool* clamped = nullptr) {
  const SymEigen e = sym_eigen(SymMatrix::from_symmetrised(m));
  const Vector v = e.values.cwiseMax(lo).cwiseMin(hi);
  if (clamped) *clamped = (v - e.values).cwiseAbs().maxCoeff() > 0.0;
  return SymMatrix::from_symmetrised(e.vectors * v.asDiagonal() * e.vectors.transpose());
}

constexpr double kPreClampFloor = 1e-6;

/// Weighted average with weights at S I; `raw` receives the unclamped value.
inline SymMatrix pre_estimate_raw(const Matrix& y, const Spectrum& spec, double e, const IndexSet& set,
                                  double s_bound, Matrix* raw, bool* clamped) {
  require(set.size() > 0, "pre_estimate: empty pre-window");
  const Eigen::Index d = y.rows();
  const WeightedResult r = weighted_estimate(y, spec, e, SymMatrix(Matrix(s_bound * Matrix::Identity(d, d))), set);
  if (raw) *raw = r.estimate;
  return clamp_eigenvalues(r.estimate, kPreClampFloor, s_bound, clamped);
}

inline SymMatrix pre_estimate(const SeqSample& s, const IndexSet& pre_set, double s_bound, bool* clamped = nullptr,
                              Matrix* raw = nullptr) {
  return pre_estimate_raw(s.values, s.model.spectrum, s.model.noise(), pre_set, s_bound, raw, clamped);
}

namespace detail {

struct AdaptiveCore {
  Matrix estimate;
  Matrix weight_sigma;  // plug-in argument for the covariance
  Matrix pre;
  Matrix info;
  int clamps = 0;
  long long occupancy = 0;
  long long pre_occupancy = 0;
};

// Adaptive estimate on data y given already-formed pre-estimates.
inline AdaptiveCore adaptive_from_pre(const Matrix& y, const Spectrum& spec, double e, IndexWindow w, SplitMode split,
                                      const SymMatrix& pre_a, const SymMatrix& pre_b) {
  AdaptiveCore c;
  switch (split) {
    case SplitMode::None: {
      const WeightedResult r = weighted_estimate(y, spec, e, pre_a, IndexSet::all(w));
      c.estimate = r.estimate;
      c.info = r.info;
      c.pre = pre_a.matrix();
      c.occupancy = IndexSet::all(w).size();
      break;
    }
    case SplitMode::Parity: {
      // pre_a comes from the odd indices.
      const WeightedResult r = weighted_estimate(y, spec, e, pre_a, IndexSet::even(w));
      c.estimate = r.estimate;
      c.info = r.info;
      c.pre = pre_a.matrix();
      c.occupancy = IndexSet::even(w).size();
      break;
    }
    case SplitMode::CrossFit: {
      // pre_a from odd indices weights the even ones and vice versa.
      const WeightedResult re = weighted_estimate(y, spec, e, pre_a, IndexSet::even(w));
      const WeightedResult ro = weighted_estimate(y, spec, e, pre_b, IndexSet::odd(w));
      c.estimate = symmetrise(0.5 * (re.estimate + ro.estimate));
      c.pre = symmetrise(0.5 * (pre_a.matrix() + pre_b.matrix()));
      c.info = weighted_estimate(y, spec, e, SymMatrix(c.pre), IndexSet::all(w)).info;
      c.occupancy = IndexSet::all(w).size();
      break;
    }
  }
  c.weight_sigma = c.pre;
  return c;
}

}  // namespace detail

/// Pre-estimates required by a split mode: (a, b) as consumed by adaptive_from_pre.
struct PrePair {
  SymMatrix a;
  SymMatrix b;
  Matrix raw_a;
  Matrix raw_b;
  int clamps = 0;
  long long occupancy = 0;
};

inline PrePair pre_estimates_for(const Matrix& y, const Spectrum& spec, double e, IndexWindow w, SplitMode split,
                                 double s_bound) {
  PrePair pp;
  bool ca = false;
  bool cb = false;
  switch (split) {
    case SplitMode::None:
      pp.a = pre_estimate_raw(y, spec, e, IndexSet::all(w), s_bound, &pp.raw_a, &ca);
      pp.b = pp.a;
      pp.raw_b = pp.raw_a;
      pp.occupancy = IndexSet::all(w).size();
      break;
    case SplitMode::Parity:
      pp.a = pre_estimate_raw(y, spec, e, IndexSet::odd(w), s_bound, &pp.raw_a, &ca);
      pp.b = pp.a;
      pp.raw_b = pp.raw_a;
      pp.occupancy = IndexSet::odd(w).size();
      break;
    case SplitMode::CrossFit:
      pp.a = pre_estimate_raw(y, spec, e, IndexSet::odd(w), s_bound, &pp.raw_a, &ca);
      pp.b = pre_estimate_raw(y, spec, e, IndexSet::even(w), s_bound, &pp.raw_b, &cb);
      pp.occupancy = IndexSet::all(w).size();
      break;
  }
  pp.clamps = (ca ? 1 : 0) + (cb ? 1 : 0);
  return pp;
}

inline EstimateReport adaptive_estimate(const SeqSample& s, const WindowConfig& cfg, double s_bound) {
  require(s_bound > 0.0, "adaptive_estimate: S must be > 0");
  const IndexWindow w = effective_window(s, cfg);
  const Spectrum& spec = s.model.spectrum;
  const double e = s.model.noise();
  const PrePair pp = pre_estimates_for(s.values, spec, e, w, cfg.split, s_bound);
  const detail::AdaptiveCore c = detail::adaptive_from_pre(s.values, spec, e, w, cfg.split, pp.a, pp.b);
  EstimateReport rep;
  rep.estimate = vec(c.estimate);
  rep.window = w;
  rep.split = cfg.split;
  rep.pre_estimate = c.pre;
  rep.covariance = quarter_inverse_z(c.info);
  rep.diagnostics.clamp_events = pp.clamps;
  rep.diagnostics.occupancy = c.occupancy;
  rep.diagnostics.pre_occupancy = pp.occupancy;
  return rep;
}

// ---------------------------------------------------------------------------
// Whitening for known noise covariance H

struct Whitening {
  SymMatrix h_sqrt;
  SymMatrix h_inv_sqrt;
  Matrix data;      // H^{-1/2} Y
  Matrix back_map;  // H^{1/2} (x) H^{1/2}

  /// Sigma' = H^{-1/2} Sigma H^{-1/2}.
  SymMatrix forward_sigma(const SymMatrix& sigma) const {
    return SymMatrix::from_symmetrised(h_inv_sqrt.matrix() * sigma.matrix() * h_inv_sqrt.matrix());
  }
  Vector back(const Vector& est) const { return back_map * est; }
  Matrix back_covariance(const Matrix& cov) const { return symmetrise(back_map * cov * back_map.transpose()); }
};

inline Whitening whiten_reduce(const Matrix& y, const SymMatrix& h) {
  require(h.dim() == y.rows(), "whiten_reduce: noise matrix dimension differs from data");
  require(h.is_positive_definite(), "whiten_reduce: noise matrix is singular");
  Whitening w{psd_sqrt(h), pd_inv_sqrt(h), Matrix(), Matrix()};
  w.data = w.h_inv_sqrt.matrix() * y;
  w.back_map = kron(w.h_sqrt.matrix(), w.h_sqrt.matrix());
  return w;
}

/// Sequence sample with noise H/n mapped to unit noise; the returned sample's
/// model has Sigma' and eta^2 = 1.
inline SeqSample whiten_sample(const SeqSample& s, const Whitening& w) {
  ParamModel m(w.forward_sigma(s.model.sigma), 1.0, s.model.n, s.model.spectrum,
               std::numeric_limits<double>::max());
  return SeqSample{m, s.p_max, w.data, s.seed};
}

// ---------------------------------------------------------------------------
// Integrated covolatility

struct BlockWindowRule {
  WindowConfig window;       // a, b relative to the per-block centre; split is cross-fit
  int pool_halfwidth = -1;   // neighbouring blocks pooled for pre-estimates; < 0 selects ceil(sqrt(m))
};

/// Window centre solving lambda_m(p) S = min_j Xi^2_kj / n_min.
inline double block_window_centre(const BlockModel& bm, int k, double s_bound) {
  const double xi2min = bm.xi2[static_cast<std::size_t>(k)].minCoeff();
  return std::sqrt(s_bound * bm.n_min / xi2min) / (std::numbers::pi * bm.m);
}

struct IntegratedReport {
  EstimateReport summary;          // estimate of int vec(Sigma), plug-in covariance
  std::vector<Matrix> block_estimates;
  std::vector<IndexWindow> block_windows;
};

inline IntegratedReport integrated_covol_estimate(const BlockSeqSample& blocks, const BlockWindowRule& rule,
                                                  double s_bound) {
  const BlockModel& bm = blocks.model;
  bm.validate();
  require(s_bound > 0.0, "integrated_covol_estimate: S must be > 0");
  const int m = bm.m;
  const Eigen::Index d = bm.dim();
  const Spectrum spec = Spectrum::power_law(1.0 / (std::numbers::pi * std::numbers::pi * m * m), 2.0);
  const double e = 1.0 / bm.n_min;
  const int h = rule.pool_halfwidth >= 0 ? rule.pool_halfwidth
                                         : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));

  std::vector<Whitening> wh;
  std::vector<IndexWindow> wins;
  std::vector<Matrix> raw_odd(static_cast<std::size_t>(m));
  std::vector<Matrix> raw_even(static_cast<std::size_t>(m));
  long long pre_occ = 0;
  for (int k = 0; k < m; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const SymMatrix xi_sq(Matrix(bm.xi2[ku].asDiagonal()));
    wh.push_back(whiten_reduce(blocks.values[ku], xi_sq));
    const IndexWindow w = rule.window.resolve(block_window_centre(bm, k, s_bound), bm.n_min, blocks.p_max);
    if (w.size() < 2)
      throw ValidationError("integrated_covol_estimate: empty effective window in block " + std::to_string(k));
    wins.push_back(w);
    // Pre-estimates in whitened units with weights at S' I, mapped back.
    const double s_white = s_bound / bm.xi2[ku].minCoeff();
    Matrix ro;
    Matrix re;
    pre_estimate_raw(wh[ku].data, spec, e, IndexSet::odd(w), s_white, &ro, nullptr);
    pre_estimate_raw(wh[ku].data, spec, e, IndexSet::even(w), s_white, &re, nullptr);
    const Matrix hs = wh[ku].h_sqrt.matrix();
    raw_odd[ku] = hs * ro * hs;
    raw_even[ku] = hs * re * hs;
    pre_occ += IndexSet::all(w).size();
  }

  IntegratedReport out;
  CompensatedSum psi(d, d);
  Matrix cov_acc = Matrix::Zero(d * d, d * d);
  const Matrix z = symmetriser(d).z;
  int clamps = 0;
  long long occ = 0;
  for (int k = 0; k < m; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const int lo = std::max(0, k - h);
    const int hi = std::min(m - 1, k + h);
    Matrix po = Matrix::Zero(d, d);
    Matrix pe = Matrix::Zero(d, d);
    for (int j = lo; j <= hi; ++j) {
      po += raw_odd[static_cast<std::size_t>(j)];
      pe += raw_even[static_cast<std::size_t>(j)];
    }
    bool c1 = false;
    bool c2 = false;
    const SymMatrix pool_odd = clamp_eigenvalues(po / (hi - lo + 1), kPreClampFloor, s_bound, &c1);
    const SymMatrix pool_even = clamp_eigenvalues(pe / (hi - lo + 1), kPreClampFloor, s_bound, &c2);
    clamps += (c1 ? 1 : 0) + (c2 ? 1 : 0);
    const detail::AdaptiveCore c =
        detail::adaptive_from_pre(wh[ku].data, spec, e, wins[ku], SplitMode::CrossFit, wh[ku].forward_sigma(pool_odd),
                                  wh[ku].forward_sigma(pool_even));
    const Matrix hs = wh[ku].h_sqrt.matrix();
    const Matrix est = symmetrise(hs * c.estimate * hs);
    out.block_estimates.push_back(est);
    psi.add(est);
    const SymMatrix plug = SymMatrix::from_symmetrised(0.5 * (pool_odd.matrix() + pool_even.matrix()));
    const LocalFisher lf = local_fisher(plug, xi_matrix(bm.xi2[ku]));
    cov_acc += 0.25 * lf.info_inv * z;
    occ += c.occupancy;
  }
  out.block_windows = wins;
  EstimateReport& rep = out.summary;
  rep.estimate = vec(symmetrise(psi.value() / m));
  rep.window = wins.front();
  rep.split = SplitMode::CrossFit;
  rep.covariance = symmetrise(cov_acc / (m * std::sqrt(bm.n_min)));
  rep.diagnostics.clamp_events = clamps;
  rep.diagnostics.occupancy = occ;
  rep.diagnostics.pre_occupancy = pre_occ;
  return out;
}

}  // namespace covest
