#pragma once

// Samplers for the sequence-space, discrete and asynchronous block models, and
// projection of discrete data onto spectral coefficients.

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "covest/block_model.hpp"
#include "covest/errors.hpp"
#include "covest/fisher.hpp"
#include "covest/matcore.hpp"
#include "covest/rng.hpp"

namespace covest {

// ---------------------------------------------------------------------------
// Sequence-space model

struct SeqSample {
  ParamModel model;
  long long p_max = 0;
  Matrix values;  // d x p_max, column p-1 holds Y_p
  StreamId seed;

  Vector y(long long p) const { return values.col(static_cast<Eigen::Index>(p - 1)); }
};

/// Y_p = V diag(sqrt(s lambda_p + eta^2/n)) Z_p, which is a square root of C_p.
inline SeqSample sample_sequence(const ParamModel& model, long long p_max, RngStream& rng) {
  require(p_max >= 1, "sample_sequence: P_max must be >= 1");
  const SymEigen eig = sym_eigen(model.sigma);
  const Eigen::Index d = model.dim();
  const double e = model.noise();
  SeqSample out{model, p_max, Matrix(d, p_max), rng.id()};
  Vector z(d);
  for (long long p = 1; p <= p_max; ++p) {
    const double lam = model.spectrum.eigenvalue(p);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal() * std::sqrt(eig.values(i) * lam + e);
    out.values.col(static_cast<Eigen::Index>(p - 1)).noalias() = eig.vectors * z;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete model on the grid i/n

enum class KernelKind { BrownianMotion, BrownianBridge, OrnsteinUhlenbeck, FractionalBM, Custom };

struct Kernel {
  KernelKind kind = KernelKind::BrownianMotion;
  double param = 0.0;  // OU beta or fBM Hurst index
  std::function<double(double, double)> custom;

  static Kernel bm() { return {KernelKind::BrownianMotion, 0.0, {}}; }
  static Kernel bb() { return {KernelKind::BrownianBridge, 0.0, {}}; }
  static Kernel ou(double beta = 0.5) { return {KernelKind::OrnsteinUhlenbeck, beta, {}}; }
  static Kernel fbm(double h) {
    require(h > 0.0 && h < 1.0, "kernel: fBM Hurst index must lie in (0, 1)");
    return {KernelKind::FractionalBM, h, {}};
  }
  static Kernel from_function(std::function<double(double, double)> f) {
    return {KernelKind::Custom, 0.0, std::move(f)};
  }

  double operator()(double s, double t) const {
    switch (kind) {
      case KernelKind::BrownianMotion: return std::min(s, t);
      case KernelKind::BrownianBridge: return std::min(s, t) - s * t;
      case KernelKind::OrnsteinUhlenbeck: return std::exp(-param * std::abs(s - t));
      case KernelKind::FractionalBM: {
        const double h2 = 2.0 * param;
        return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(s - t), h2));
      }
      case KernelKind::Custom: return custom(s, t);
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
      case KernelKind::BrownianMotion: return "bm";
      case KernelKind::BrownianBridge: return "bb";
      case KernelKind::OrnsteinUhlenbeck: return "ou:" + std::to_string(param);
      case KernelKind::FractionalBM: return "fbm:" + std::to_string(param);
      case KernelKind::Custom: return "custom";
    }
    return "?";
  }
};

enum class DiscreteBackend {
  Dense,               // factorisation of the n x n Gram matrix
  KarhunenLoeve,       // truncated eigen-expansion (BM and BB)
};

struct DiscreteSample {
  std::string kernel;
  double eta2 = 0.0;
  Matrix values;  // n x d, row i-1 holds the observation at t = i/n
  StreamId seed;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
  double time(Eigen::Index i) const { return static_cast<double>(i) / static_cast<double>(values.rows()); }
};

/// Reusable sampler for Y_i = Sigma^{1/2} G_{i/n} + eps_i. Construction does
/// the expensive factorisation; draw() only consumes the stream.
class DiscreteSampler {
 public:
  static constexpr Eigen::Index kDenseLimit = 20000;

  DiscreteSampler(const SymMatrix& sigma, Kernel kernel, Eigen::Index n, double eta2,
                  DiscreteBackend backend = DiscreteBackend::Dense)
      : kernel_(std::move(kernel)), n_(n), eta2_(eta2), backend_(backend) {
    require(n >= 1, "sample_discrete: n must be >= 1");
    require(eta2 >= 0.0, "sample_discrete: eta^2 must be >= 0");
    require(sigma.eigenvalues().minCoeff() >= 0.0, "sample_discrete: Sigma must be PSD");
    root_ = psd_sqrt(sigma).matrix();
    if (backend_ == DiscreteBackend::Dense) {
      require(n <= kDenseLimit, "sample_discrete: dense backend is limited to n <= 20000");
      build_dense();
    } else {
      require(kernel_.kind == KernelKind::BrownianMotion || kernel_.kind == KernelKind::BrownianBridge,
              "sample_discrete: Karhunen-Loeve backend needs a BM or BB kernel");
      build_kl();
    }
  }

  DiscreteSample draw(RngStream& rng) const {
    const Eigen::Index d = root_.rows();
    Matrix g(n_, d);
    if (backend_ == DiscreteBackend::Dense) {
      Matrix z(n_, d);
      rng.fill_normal(z);
      if (general_factor_)
        g = factor_ * z;
      else
        g = factor_.triangularView<Eigen::Lower>() * z;
    } else {
      for (Eigen::Index j = 0; j < d; ++j) g.col(j) = draw_kl(rng);
    }
    Matrix eps(n_, d);
    rng.fill_normal(eps);
    DiscreteSample s;
    s.kernel = kernel_.name();
    s.eta2 = eta2_;
    s.values = g * root_ + std::sqrt(eta2_) * eps;  // root_ is symmetric
    s.seed = rng.id();
    return s;
  }

  long long kl_terms() const { return kl_terms_; }
  bool general_factor() const { return general_factor_; }

 private:
  void build_dense() {
    Matrix gram(n_, n_);
    for (Eigen::Index j = 0; j < n_; ++j)
      for (Eigen::Index i = 0; i <= j; ++i)
        gram(i, j) = gram(j, i) = kernel_(static_cast<double>(i + 1) / n_, static_cast<double>(j + 1) / n_);
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() == Eigen::Success) {
      factor_ = llt.matrixL();
      return;
    }
    // Semi-definite Gram (for instance the bridge pinned at t = 1): use an
    // LDL^T factor with clamped pivots.
    Eigen::LDLT<Matrix> ldlt(gram);
    const Vector dd = ldlt.vectorD();
    const double top = std::max(dd.cwiseAbs().maxCoeff(), 1e-300);
    if (ldlt.info() != Eigen::Success || dd.minCoeff() < -1e-10 * top)
      throw ValidationError("sample_discrete: kernel Gram matrix is not PSD");
    Matrix l = ldlt.matrixL();
    l = l * dd.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    factor_ = ldlt.transpositionsP().transpose() * l;
    general_factor_ = true;
  }

  // phi_k(i/n) is periodic in k with period 2n, so the K-term expansion
  // collapses exactly onto 2n aggregated Gaussian coefficients whose variances
  // are the aliased eigenvalue sums. One FFT per draw evaluates the sum.
  void build_kl() {
    using std::numbers::pi;
    const bool bm = kernel_.kind == KernelKind::BrownianMotion;
    const double total = bm ? 0.5 : 1.0 / 6.0;
    const double tail_tol = 1e-6 * total;
    kl_terms_ = static_cast<long long>(std::ceil(1.0 / (pi * pi * tail_tol))) + 2;
    const Eigen::Index period = 2 * n_;
    alias_sd_ = Vector::Zero(period);
    for (long long k = 1; k <= kl_terms_; ++k) {
      const double x = pi * (bm ? static_cast<double>(k) - 0.5 : static_cast<double>(k));
      alias_sd_(static_cast<Eigen::Index>(k % period)) += 1.0 / (x * x);
    }
    alias_sd_ = alias_sd_.cwiseSqrt();
  }

  Vector draw_kl(RngStream& rng) const {
    using std::numbers::pi;
    const Eigen::Index period = 2 * n_;
    std::vector<double> b(static_cast<std::size_t>(period));
    for (Eigen::Index q = 0; q < period; ++q) b[static_cast<std::size_t>(q)] = alias_sd_(q) * rng.normal();
    std::vector<std::complex<double>> f;
    Eigen::FFT<double> fft;
    fft.fwd(f, b);
    const bool bm = kernel_.kind == KernelKind::BrownianMotion;
    Vector x(n_);
    for (Eigen::Index i = 1; i <= n_; ++i) {
      // sum_q b_q exp(+i pi q i/n) = conj(F_i) for real b.
      std::complex<double> s = std::conj(f[static_cast<std::size_t>(i % period)]);
      if (bm) s *= std::polar(1.0, -pi * static_cast<double>(i) / static_cast<double>(period));
      x(i - 1) = std::numbers::sqrt2 * s.imag();
    }
    return x;
  }

  Kernel kernel_;
  Eigen::Index n_;
  double eta2_;
  DiscreteBackend backend_;
  Matrix root_;
  Matrix factor_;
  bool general_factor_ = false;  // pivoted LDL^T factor, not triangular
  Vector alias_sd_;
  long long kl_terms_ = 0;
};

inline DiscreteSample sample_discrete(const SymMatrix& sigma, const Kernel& kernel, Eigen::Index n, double eta2,
                                      RngStream& rng, DiscreteBackend backend = DiscreteBackend::Dense) {
  return DiscreteSampler(sigma, kernel, n, eta2, backend).draw(rng);
}

enum class Eigenbasis { BrownianMotion, BrownianBridge };

/// Antiderivative of phi_p(t) = sqrt(2) sin(omega_p t) with omega_p = (p - 1/2) pi
/// (BM) or p pi (BB).
inline double eigenbasis_omega(Eigenbasis basis, long long p) {
  const double q = basis == Eigenbasis::BrownianMotion ? static_cast<double>(p) - 0.5 : static_cast<double>(p);
  return std::numbers::pi * q;
}

/// Ybar_p[j] = sum_i Y_i[j] int_{((i-1)/n, i/n]} phi_p(t) dt.
inline SeqSample extract_spectral_coeffs(const DiscreteSample& sample, Eigenbasis basis, long long p_max,
                                         const ParamModel& model) {
  require(p_max >= 1, "extract_spectral_coeffs: P_max must be >= 1");
  require(model.dim() == sample.dim(), "extract_spectral_coeffs: model and sample dimensions differ");
  const Eigen::Index n = sample.n();
  SeqSample out{model, p_max, Matrix(sample.dim(), p_max), sample.seed};
  Vector w(n);
  for (long long p = 1; p <= p_max; ++p) {
    const double om = eigenbasis_omega(basis, p);
    double prev = 1.0;  // cos(0)
    for (Eigen::Index i = 1; i <= n; ++i) {
      const double cur = std::cos(om * static_cast<double>(i) / static_cast<double>(n));
      w(i - 1) = std::numbers::sqrt2 * (prev - cur) / om;
      prev = cur;
    }
    out.values.col(static_cast<Eigen::Index>(p - 1)) = sample.values.transpose() * w;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Semiparametric block model

struct BlockSeqSample {
  BlockModel model;
  long long p_max = 0;
  std::vector<Matrix> values;  // per block: d x p_max
  StreamId seed;
};

/// Y_pk ~ N(0, C_pk), drawn block by block and frequency by frequency.
inline BlockSeqSample sample_block_sequence(const BlockModel& bm, long long p_max, RngStream& rng) {
  require(p_max >= 1, "sample_block_sequence: P_max must be >= 1");
  bm.validate();
  const Eigen::Index d = bm.dim();
  BlockSeqSample out{bm, p_max, {}, rng.id()};
  out.values.reserve(static_cast<std::size_t>(bm.m));
  Vector z(d);
  for (int k = 0; k < bm.m; ++k) {
    // C_pk = X (Sigma' lambda + I/n_min) X with X = Xi, Sigma' = X^{-1} Sigma X^{-1}.
    const Vector x = bm.xi2[static_cast<std::size_t>(k)].cwiseSqrt();
    const Vector xinv = x.cwiseInverse();
    const SymEigen eig = sym_eigen(SymMatrix::from_symmetrised(
        xinv.asDiagonal() * bm.sigma[static_cast<std::size_t>(k)].matrix() * xinv.asDiagonal()));
    const Matrix left = x.asDiagonal() * eig.vectors;
    Matrix vals(d, p_max);
    for (long long p = 1; p <= p_max; ++p) {
      const double lam = bm.lambda(p);
      for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal() * std::sqrt(eig.values(i) * lam + 1.0 / bm.n_min);
      vals.col(static_cast<Eigen::Index>(p - 1)).noalias() = left * z;
    }
    out.values.push_back(std::move(vals));
  }
  return out;
}

/// Per-component tick series (t_{i,j}, Y_{i,j}), i = 1..n_j.
struct TickSeries {
  std::vector<std::vector<double>> times;
  std::vector<std::vector<double>> values;
  StreamId seed;

  std::size_t dim() const { return times.size(); }
};

/// Reusable asynchronous sampler. The path X_t = int_0^t Sigma_m^{1/2} dB is
/// evolved on the union of the fine grid, the block boundaries and every tick
/// time, so each increment lies inside one block and is exact.
class AsyncSampler {
 public:
  AsyncSampler(const BlockModel& bm, const ObservationSchedule& schedule, long long grid_size)
      : bm_(bm), schedule_(schedule) {
    schedule_.validate();
    bm_.validate();
    require(schedule_.dim() == bm_.dim(), "sample_async: schedule and block model dimensions differ");
    require(grid_size >= 4 * schedule_.n_max(), "sample_async: path grid must have >= 4 max_j n_j points");
    for (int k = 0; k < bm_.m; ++k) roots_.push_back(psd_sqrt(bm_.sigma[static_cast<std::size_t>(k)]).matrix());

    std::vector<double> pts;
    pts.reserve(static_cast<std::size_t>(grid_size + bm_.m) + 16);
    for (long long g = 1; g <= grid_size; ++g) pts.push_back(static_cast<double>(g) / static_cast<double>(grid_size));
    for (int k = 1; k <= bm_.m; ++k) pts.push_back(static_cast<double>(k) / bm_.m);
    for (const auto& c : schedule_.components)
      for (long long i = 1; i <= c.n; ++i) pts.push_back(c.tick_time(i));
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    points_ = std::move(pts);

    double prev = 0.0;
    step_sd_.reserve(points_.size());
    block_.reserve(points_.size());
    for (double t : points_) {
      step_sd_.push_back(std::sqrt(t - prev));
      block_.push_back(std::min(bm_.m - 1, static_cast<int>(std::floor(prev * bm_.m))));
      prev = t;
    }
    tick_index_.resize(schedule_.components.size());
    for (std::size_t j = 0; j < schedule_.components.size(); ++j) {
      const auto& c = schedule_.components[j];
      for (long long i = 1; i <= c.n; ++i) {
        const double t = c.tick_time(i);
        const auto it = std::lower_bound(points_.begin(), points_.end(), t);
        tick_index_[j].push_back(static_cast<std::size_t>(it - points_.begin()));
      }
    }
  }

  TickSeries draw(RngStream& rng) const {
    const Eigen::Index d = bm_.dim();
    Matrix path(d, static_cast<Eigen::Index>(points_.size()));
    Vector x = Vector::Zero(d);
    Vector z(d);
    for (std::size_t g = 0; g < points_.size(); ++g) {
      for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
      x += step_sd_[g] * (roots_[static_cast<std::size_t>(block_[g])] * z);
      path.col(static_cast<Eigen::Index>(g)) = x;
    }
    TickSeries out;
    out.seed = rng.id();
    out.times.resize(schedule_.components.size());
    out.values.resize(schedule_.components.size());
    for (std::size_t j = 0; j < schedule_.components.size(); ++j) {
      const auto& c = schedule_.components[j];
      auto& ts = out.times[j];
      auto& vs = out.values[j];
      ts.reserve(static_cast<std::size_t>(c.n));
      vs.reserve(static_cast<std::size_t>(c.n));
      for (long long i = 1; i <= c.n; ++i) {
        const std::size_t g = tick_index_[j][static_cast<std::size_t>(i - 1)];
        ts.push_back(points_[g]);
        vs.push_back(path(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(g)) + c.eta * rng.normal());
      }
    }
    return out;
  }

  std::size_t path_points() const { return points_.size(); }

 private:
  BlockModel bm_;
  ObservationSchedule schedule_;
  std::vector<Matrix> roots_;
  std::vector<double> points_;
  std::vector<double> step_sd_;
  std::vector<int> block_;
  std::vector<std::vector<std::size_t>> tick_index_;
};

inline TickSeries sample_async(const BlockModel& bm, const ObservationSchedule& schedule, long long grid_size,
                               RngStream& rng) {
  return AsyncSampler(bm, schedule, grid_size).draw(rng);
}

/// S_pk[j] = sum_i Y_{i,j} int_{(t_{i-1,j}, t_{i,j}] cap I_k} phi_pk(t) dt with
/// phi_pk(t) = sqrt(2m) cos(p pi (t m - k)) on I_k and t_{0,j} = 0.
inline BlockSeqSample block_coeffs_from_ticks(const TickSeries& ticks, const BlockModel& bm, long long p_max) {
  require(p_max >= 1, "block_coeffs_from_ticks: P_max must be >= 1");
  require(static_cast<Eigen::Index>(ticks.dim()) == bm.dim(),
          "block_coeffs_from_ticks: tick series and block model dimensions differ");
  const int m = bm.m;
  const Eigen::Index d = bm.dim();
  BlockSeqSample out{bm, p_max, std::vector<Matrix>(static_cast<std::size_t>(m), Matrix::Zero(d, p_max)),
                     ticks.seed};

  // Resolution check: every block needs 2 P_max ticks per component.
  for (std::size_t j = 0; j < ticks.dim(); ++j) {
    std::vector<long long> count(static_cast<std::size_t>(m), 0);
    for (double t : ticks.times[j]) {
      const int k = std::min(m - 1, static_cast<int>(std::floor(t * m - 1e-12)));
      ++count[static_cast<std::size_t>(std::max(k, 0))];
    }
    for (int k = 0; k < m; ++k)
      if (count[static_cast<std::size_t>(k)] < 2 * p_max)
        throw ValidationError("block_coeffs_from_ticks: under-resolved block " + std::to_string(k) +
                              " (component " + std::to_string(j) + ")");
  }

  using std::numbers::pi;
  const double amp = std::sqrt(2.0 * m) / (pi * m);
  std::vector<double> sa(static_cast<std::size_t>(p_max));
  std::vector<double> sb(static_cast<std::size_t>(p_max));
  // sin(p theta) for p = 1..P by the Chebyshev recurrence.
  auto sines = [&](double theta, std::vector<double>& s) {
    const double c2 = 2.0 * std::cos(theta);
    double s_prev = 0.0;
    double s_cur = std::sin(theta);
    for (long long p = 0; p < p_max; ++p) {
      s[static_cast<std::size_t>(p)] = s_cur;
      const double nxt = c2 * s_cur - s_prev;
      s_prev = s_cur;
      s_cur = nxt;
    }
  };
  for (std::size_t j = 0; j < ticks.dim(); ++j) {
    const auto& ts = ticks.times[j];
    const auto& ys = ticks.values[j];
    double prev = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      double a = prev;
      const double b = ts[i];
      while (a < b) {
        const int k = std::min(m - 1, static_cast<int>(std::floor(a * m)));
        const double end = std::min(b, static_cast<double>(k + 1) / m);
        // Antiderivative amp sin(p pi (t m - k)) / p; theta stays in [0, pi].
        sines(pi * (a * m - k), sa);
        sines(pi * (end * m - k), sb);
        auto& blk = out.values[static_cast<std::size_t>(k)];
        const double y = ys[i];
        for (long long p = 0; p < p_max; ++p)
          blk(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p)) +=
              y * amp * (sb[static_cast<std::size_t>(p)] - sa[static_cast<std::size_t>(p)]) /
              static_cast<double>(p + 1);
        a = end;
      }
      prev = b;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV dumps

inline void write_ticks_csv(std::ostream& os, const TickSeries& ticks) {
  os << "t,component,value\n" << std::setprecision(17);
  for (std::size_t j = 0; j < ticks.dim(); ++j)
    for (std::size_t i = 0; i < ticks.times[j].size(); ++i)
      os << ticks.times[j][i] << ',' << j + 1 << ',' << ticks.values[j][i] << '\n';
}

inline void write_discrete_csv(std::ostream& os, const DiscreteSample& s) {
  os << 'i';
  for (Eigen::Index j = 0; j < s.dim(); ++j) os << ",y_" << j + 1;
  os << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    os << i + 1;
    for (Eigen::Index j = 0; j < s.dim(); ++j) os << ',' << s.values(i, j);
    os << '\n';
  }
}

}  // namespace covest
