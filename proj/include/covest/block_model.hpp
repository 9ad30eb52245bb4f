#pragma once

// Asynchronous observation schedules and the piecewise-constant block model
// used for integrated covolatility.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "covest/errors.hpp"
#include "covest/matcore.hpp"

namespace covest {

/// Observation design of one component: n_j ticks at F_j^{-1}(i/n_j) with
/// F_j(t) = (1 - w) t + w t^2, w in [0, 1), and N(0, eta_j^2) noise.
struct ComponentSchedule {
  long long n = 0;
  double eta = 1.0;
  double w = 0.0;

  double cdf(double t) const { return (1.0 - w) * t + w * t * t; }
  double density(double t) const { return (1.0 - w) + 2.0 * w * t; }

  /// Inverse CDF via the cancellation-free root of w t^2 + (1-w) t - u = 0.
  double quantile(double u) const {
    const double b = 1.0 - w;
    return 2.0 * u / (b + std::sqrt(b * b + 4.0 * w * u));
  }

  double tick_time(long long i) const {
    if (i >= n) return 1.0;
    return quantile(static_cast<double>(i) / static_cast<double>(n));
  }
};

struct ObservationSchedule {
  std::vector<ComponentSchedule> components;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(components.size()); }

  long long n_min() const {
    long long m = components.front().n;
    for (const auto& c : components) m = std::min(m, c.n);
    return m;
  }
  long long n_max() const {
    long long m = components.front().n;
    for (const auto& c : components) m = std::max(m, c.n);
    return m;
  }

  /// nu_j = n_min / n_j.
  double nu(std::size_t j) const {
    return static_cast<double>(n_min()) / static_cast<double>(components[j].n);
  }

  /// Diagonal of Xi^2(t) = diag(eta_j^2 nu_j / F_j'(t)).
  Vector xi2(double t) const {
    Vector out(dim());
    for (std::size_t j = 0; j < components.size(); ++j) {
      const auto& c = components[j];
      out(static_cast<Eigen::Index>(j)) = c.eta * c.eta * nu(j) / c.density(t);
    }
    return out;
  }

  void validate() const {
    require(!components.empty(), "schedule: at least one component is required");
    for (const auto& c : components) {
      require(c.n >= 2, "schedule: every component needs n_j >= 2");
      require(c.eta > 0.0, "schedule: noise level eta_j must be > 0");
      require(c.w >= 0.0 && c.w < 1.0, "schedule: CDF weight w_j must lie in [0, 1)");
    }
  }

  static ObservationSchedule uniform(Eigen::Index d, long long n, double eta) {
    ObservationSchedule s;
    s.components.assign(static_cast<std::size_t>(d), ComponentSchedule{n, eta, 0.0});
    return s;
  }
};

/// Sigma(t) = base + t * slope, t in [0, 1].
struct LinearSigmaPath {
  Matrix base;
  Matrix slope;

  SymMatrix operator()(double t) const { return SymMatrix::from_symmetrised(base + t * slope); }

  /// Closed-form integral over [0, 1].
  Matrix integral() const { return base + 0.5 * slope; }

  static LinearSigmaPath constant(const Matrix& s) { return {s, Matrix::Zero(s.rows(), s.cols())}; }
};

/// Piecewise-constant approximation on m blocks I_k = [k/m, (k+1)/m):
/// C_pk = Sigma(k/m) lambda_mp + Xi^2(k/m) / n_min with lambda_mp = (pi p m)^{-2}.
struct BlockModel {
  int m = 1;
  std::vector<SymMatrix> sigma;  // Sigma(k/m)
  std::vector<Vector> xi2;       // diag of Xi^2(k/m)
  double n_min = 0.0;
  double s_bound = 0.0;

  Eigen::Index dim() const { return sigma.front().dim(); }

  double lambda(long long p) const {
    const double x = std::numbers::pi * static_cast<double>(p) * m;
    return 1.0 / (x * x);
  }

  SymMatrix cov_block(long long p, int k) const {
    Matrix c = sigma[static_cast<std::size_t>(k)].matrix() * lambda(p);
    c.diagonal() += xi2[static_cast<std::size_t>(k)] / n_min;
    return SymMatrix(c);
  }

  void validate() const {
    require(m >= 1 && static_cast<int>(sigma.size()) == m && static_cast<int>(xi2.size()) == m,
            "block model: need one Sigma and one Xi per block");
    require(s_bound > 1.0, "block model: S must be > 1");
    require(static_cast<double>(m) < std::sqrt(n_min), "block model: need m < sqrt(n_min)");
    for (int k = 0; k < m; ++k) {
      const Vector ev = sigma[static_cast<std::size_t>(k)].eigenvalues();
      require(ev.minCoeff() > 1.0 / s_bound && ev.maxCoeff() < s_bound,
              "block model: Sigma(k/m) must satisfy S^{-1} I < Sigma < S I (block " +
                  std::to_string(k) + ")");
      require(xi2[static_cast<std::size_t>(k)].minCoeff() > 0.0, "block model: Xi^2 must be positive");
    }
  }

  static BlockModel build(const std::function<SymMatrix(double)>& sigma_path,
                          const ObservationSchedule& schedule, int m, double s_bound) {
    schedule.validate();
    BlockModel b;
    b.m = m;
    b.n_min = static_cast<double>(schedule.n_min());
    b.s_bound = s_bound;
    for (int k = 0; k < m; ++k) {
      const double t = static_cast<double>(k) / m;
      b.sigma.push_back(sigma_path(t));
      require(b.sigma.back().dim() == schedule.dim(), "block model: Sigma and schedule dimensions differ");
      b.xi2.push_back(schedule.xi2(t));
    }
    b.validate();
    return b;
  }
};

}  // namespace covest
