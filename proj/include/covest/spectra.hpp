#pragma once

// Eigenvalue models of the signal covariance operator and the balance-index /
// rate machinery derived from their regular variation.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "covest/errors.hpp"

namespace covest {

enum class SpectrumKind {
  BrownianMotion,
  BrownianBridge,
  OrnsteinUhlenbeck,
  FractionalBM,
  IntegratedBM,
  CustomPowerLaw,
  TabulatedTail,
};

/// Eigenvalue sequence lambda_p, p >= 1, regularly varying with index -delta.
///
/// Built-in kinds return the leading term of their known eigenvalue
/// asymptotics; every built-in has a slowly varying part converging to the
/// leading constant c, so lambda(p) ~ c p^{-delta}.
class Spectrum {
 public:
  static Spectrum brownian_motion() { return Spectrum(SpectrumKind::BrownianMotion, 2.0, pi2inv()); }
  static Spectrum brownian_bridge() { return Spectrum(SpectrumKind::BrownianBridge, 2.0, pi2inv()); }

  static Spectrum ornstein_uhlenbeck(double beta = 0.5) {
    require(beta > 0.0, "OrnsteinUhlenbeck: beta must be > 0");
    Spectrum s(SpectrumKind::OrnsteinUhlenbeck, 2.0, 2.0 * beta * pi2inv());
    s.param_ = beta;
    return s;
  }

  /// H in (1/4, 1); H in (0, 1/4] only with `allow_unvalidated`, which marks
  /// the spectrum as outside the regime where the discrete and sequence
  /// models are known to be equivalent.
  static Spectrum fractional_bm(double hurst, bool allow_unvalidated = false) {
    require(hurst > 0.0 && hurst < 1.0, "FractionalBM: H must lie in (0, 1)");
    require(hurst > 0.25 || allow_unvalidated,
            "FractionalBM: H <= 1/4 requires the unvalidated-regime flag");
    const double delta = 2.0 * hurst + 1.0;
    const double c = std::sin(hurst * std::numbers::pi) * std::tgamma(delta) /
                     std::pow(std::numbers::pi, delta);
    Spectrum s(SpectrumKind::FractionalBM, delta, c);
    s.param_ = hurst;
    s.unvalidated_ = hurst <= 0.25;
    return s;
  }

  static Spectrum integrated_bm(int m_fold) {
    require(m_fold >= 1, "IntegratedBM: m_fold must be >= 1");
    const double delta = 2.0 * m_fold + 2.0;
    Spectrum s(SpectrumKind::IntegratedBM, delta, std::pow(std::numbers::pi, -delta));
    s.param_ = m_fold;
    return s;
  }

  static Spectrum power_law(double c, double delta) {
    require(c > 0.0, "CustomPowerLaw: c must be > 0");
    require(delta > 1.0, "CustomPowerLaw: delta must be > 1");
    return Spectrum(SpectrumKind::CustomPowerLaw, delta, c);
  }

  /// Explicit values for p = 1..K followed by the tail c p^{-delta}.
  static Spectrum tabulated(std::vector<double> values, double c, double delta) {
    require(!values.empty(), "TabulatedTail: at least one tabulated value is required");
    require(c > 0.0 && delta > 1.0, "TabulatedTail: need c > 0 and delta > 1");
    for (std::size_t i = 0; i < values.size(); ++i) {
      require(values[i] > 0.0, "TabulatedTail: values must be positive");
      require(i == 0 || values[i] <= values[i - 1], "TabulatedTail: values must be non-increasing");
    }
    const double first_tail = c * std::pow(static_cast<double>(values.size() + 1), -delta);
    require(first_tail <= values.back(), "TabulatedTail: tail must continue non-increasingly");
    Spectrum s(SpectrumKind::TabulatedTail, delta, c);
    s.table_ = std::move(values);
    return s;
  }

  /// Parses "bm", "bb", "ou[:beta]", "fbm:H", "ibm:m", "power:c,delta".
  static Spectrum parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    auto number = [&](const std::string& s) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == s.size() && !s.empty(), "spectrum: cannot parse number '" + s + "' in '" + text + "'");
      return v;
    };
    if (head == "bm") return brownian_motion();
    if (head == "bb") return brownian_bridge();
    if (head == "ou") return ornstein_uhlenbeck(arg.empty() ? 0.5 : number(arg));
    if (head == "fbm") return fractional_bm(number(arg));
    if (head == "fbm-unvalidated") return fractional_bm(number(arg), true);
    if (head == "ibm") {
      const double m = number(arg);
      require(m == std::floor(m), "spectrum: ibm needs an integer fold count");
      return integrated_bm(static_cast<int>(m));
    }
    if (head == "power") {
      const auto comma = arg.find(',');
      require(comma != std::string::npos, "spectrum: power needs 'power:c,delta'");
      return power_law(number(arg.substr(0, comma)), number(arg.substr(comma + 1)));
    }
    throw ValidationError("spectrum: unknown kind '" + text + "'");
  }

  SpectrumKind kind() const { return kind_; }
  double delta() const { return delta_; }
  double leading_constant() const { return c_; }
  double parameter() const { return param_; }
  bool unvalidated_regime() const { return unvalidated_; }
  const std::vector<double>& table() const { return table_; }

  /// True when the continuous interpolation is exactly c p^{-delta}.
  bool is_pure_power_law() const {
    return kind_ != SpectrumKind::BrownianMotion && kind_ != SpectrumKind::TabulatedTail;
  }

  /// Continuous, strictly decreasing interpolation lambda(p), p > 0
  /// (p > 1/2 for Brownian motion).
  double operator()(double p) const {
    using std::numbers::pi;
    switch (kind_) {
      case SpectrumKind::BrownianMotion: {
        const double x = pi * (p - 0.5);
        return 1.0 / (x * x);
      }
      case SpectrumKind::TabulatedTail:
        return tabulated_at(p);
      default:
        return c_ * std::pow(p, -delta_);
    }
  }

  double eigenvalue(long long p) const {
    require(p >= 1, "eigenvalue: index p must be >= 1");
    return (*this)(static_cast<double>(p));
  }

  /// lim_n n^{-1/delta} p_n = c^{1/delta}.
  double zeta_limit() const { return std::pow(c_, 1.0 / delta_); }

  std::string name() const {
    std::ostringstream os;
    switch (kind_) {
      case SpectrumKind::BrownianMotion: return "bm";
      case SpectrumKind::BrownianBridge: return "bb";
      case SpectrumKind::OrnsteinUhlenbeck: os << "ou:" << param_; break;
      case SpectrumKind::FractionalBM: os << (unvalidated_ ? "fbm-unvalidated:" : "fbm:") << param_; break;
      case SpectrumKind::IntegratedBM: os << "ibm:" << static_cast<int>(param_); break;
      case SpectrumKind::CustomPowerLaw: os << "power:" << c_ << "," << delta_; break;
      case SpectrumKind::TabulatedTail: os << "tabulated:" << table_.size() << "," << c_ << "," << delta_; break;
    }
    return os.str();
  }

 private:
  Spectrum(SpectrumKind kind, double delta, double c) : kind_(kind), delta_(delta), c_(c) {}

  static constexpr double pi2inv() { return 1.0 / (std::numbers::pi * std::numbers::pi); }

  double tail(double p) const { return c_ * std::pow(p, -delta_); }

  // Log-linear between integer nodes; the node after the table is the tail.
  double tabulated_at(double p) const {
    const double k = static_cast<double>(table_.size());
    if (p >= k + 1.0) return tail(p);
    auto node = [&](double q) {
      return q <= k ? table_[static_cast<std::size_t>(q) - 1] : tail(q);
    };
    double lo = std::floor(p);
    if (lo < 1.0) lo = 1.0;
    if (lo >= k + 1.0) lo = k;
    const double hi = lo + 1.0;
    const double a = std::log(node(lo));
    const double b = std::log(node(hi));
    return std::exp(a + (b - a) * (p - lo));
  }

  SpectrumKind kind_;
  double delta_;
  double c_;
  double param_ = 0.0;
  bool unvalidated_ = false;
  std::vector<double> table_;
};

/// Solves lambda(p) = 1/n by bisection in log p; relative tolerance 1e-12.
inline double balance_index_bisection(const Spectrum& s, double n) {
  require(n >= 2.0, "balance_index: n must be >= 2");
  const double target = 1.0 / n;
  double lo = 1.0;
  double hi = n;
  // Smallest admissible argument of the continuous interpolation.
  const double floor_p = s.kind() == SpectrumKind::BrownianMotion ? 0.5 + 1e-9 : 1e-9;
  while (s(lo) < target && lo > floor_p) lo = std::max(floor_p, 0.5 * (lo + floor_p));
  if (!(s(lo) >= target && s(hi) <= target))
    throw NumericalError("balance_index: no root of lambda(p) = 1/n in bracket for spectrum " + s.name());
  for (int it = 0; it < 400 && (hi - lo) > 1e-13 * hi; ++it) {
    const double mid = std::sqrt(lo * hi);
    (s(mid) >= target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Frequency p_n with lambda(p_n) = 1/n.
inline double balance_index(const Spectrum& s, double n) {
  require(n >= 2.0, "balance_index: n must be >= 2");
  if (s.is_pure_power_law()) return std::pow(s.leading_constant() * n, 1.0 / s.delta());
  return balance_index_bisection(s, n);
}

struct ZetaPoint {
  double n;
  double zeta;
};

struct RateInfo {
  double n = 0;
  double p_n = 0;
  double r_n = 0;     // n^{-1/(2 delta)}
  double zeta = 0;    // n^{-1/delta} p_n at this n
  double zeta_limit = 0;
  std::vector<ZetaPoint> convergence;  // zeta at n, 10n, 100n
};

inline RateInfo rate_and_zeta(const Spectrum& s, double n) {
  RateInfo info;
  info.n = n;
  info.p_n = balance_index(s, n);
  info.r_n = std::pow(n, -0.5 / s.delta());
  info.zeta = std::pow(n, -1.0 / s.delta()) * info.p_n;
  info.zeta_limit = s.zeta_limit();
  for (double f : {1.0, 10.0, 100.0}) {
    const double m = n * f;
    info.convergence.push_back({m, std::pow(m, -1.0 / s.delta()) * balance_index(s, m)});
  }
  return info;
}

struct RegVarCheck {
  double a;
  double ratio;      // lambda(floor(a p)) / lambda(p)
  double expected;   // a^{-delta}
  double ratio_squared;      // same for lambda^2, expected a^{-2 delta}
  double ratio_reciprocal;   // same for 1/lambda, expected a^{delta}
  bool pass;
};

struct RegVarReport {
  double p_probe;
  double tol;
  std::vector<RegVarCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

inline RegVarReport check_regular_variation(const Spectrum& s, const std::vector<double>& a_values,
                                            double p_probe, double tol) {
  require(p_probe >= 1.0, "check_regular_variation: p_probe must be >= 1");
  RegVarReport rep{p_probe, tol, {}};
  const double base = s(p_probe);
  for (double a : a_values) {
    require(a > 0.0, "check_regular_variation: a must be > 0");
    const double q = std::floor(a * p_probe);
    require(q >= 1.0, "check_regular_variation: floor(a p) must be >= 1");
    RegVarCheck c{};
    c.a = a;
    c.ratio = s(q) / base;
    c.expected = std::pow(a, -s.delta());
    c.ratio_squared = c.ratio * c.ratio;
    c.ratio_reciprocal = 1.0 / c.ratio;
    // Closure checks use the relative tolerance implied by the absolute one;
    // squaring doubles a relative error, inversion keeps it (to first order).
    const double rel = tol / c.expected;
    const bool sq_ok =
        std::abs(c.ratio_squared / std::pow(a, -2.0 * s.delta()) - 1.0) < 2.0 * rel + rel * rel;
    const bool rec_ok = std::abs(c.ratio_reciprocal * c.expected - 1.0) < rel / (1.0 - std::min(rel, 0.5));
    c.pass = std::abs(c.ratio - c.expected) < tol && sq_ok && rec_ok;
    rep.checks.push_back(c);
  }
  return rep;
}

}  // namespace covest
