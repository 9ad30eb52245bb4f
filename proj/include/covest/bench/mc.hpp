#pragma once

// Monte Carlo harness. Replication r draws from its own substream
// (seed, r, component, purpose), writes only slot r, and all aggregation runs
// in replication order, so reports do not depend on the thread count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <vector>

#include "covest/bench/config.hpp"
#include "covest/bench/report.hpp"
#include "covest/block_model.hpp"
#include "covest/estimate.hpp"
#include "covest/fisher.hpp"
#include "covest/parallel.hpp"
#include "covest/simulate.hpp"

namespace covest::bench {

inline double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty sample");
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  const double hi = v[h];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h));
  return 0.5 * (lo + hi);
}

inline void check_replications(const ExperimentConfig& cfg) {
  require(cfg.replications >= 1, "mc.replications: R must be >= 1");
  require(cfg.replications >= 100 || cfg.force,
          "mc.replications: R < 100 is statistically meaningless; pass --force to run anyway");
}

class WallClock {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Oracle and adaptive estimators on the sequence model at one n.
inline McReport run_mc_parametric(const ExperimentConfig& cfg, double n) {
  require(cfg.kind == ExperimentKind::McParametric, "run_mc_parametric: experiment kind must be mc-parametric");
  cfg.validate();
  check_replications(cfg);
  const WallClock clock;
  const Spectrum spec = cfg.spectrum_obj();
  const SymMatrix sigma(cfg.sigma_matrix());
  const double eta = cfg.eta.front();
  const ParamModel model(sigma, eta * eta, n, spec, cfg.s_bound);
  const WindowConfig wc = cfg.window();
  const IndexWindow w = wc.resolve(balance_centre(model), n);
  require(w.size() >= 2, "mc: effective window is empty");
  const long long p_max = w.hi;
  const auto reps = static_cast<std::size_t>(cfg.replications);
  const Eigen::Index k = sigma.dim() * sigma.dim();

  Matrix oracle(static_cast<Eigen::Index>(reps), k);
  Matrix adaptive(static_cast<Eigen::Index>(reps), k);
  std::vector<int> clamps(reps, 0);
  parallel_for(reps, cfg.threads, [&](std::size_t r) {
    RngStream rng(cfg.seed, r, 0, Purpose::Signal);
    const SeqSample s = sample_sequence(model, p_max, rng);
    const EstimateReport o = oracle_estimate(s, sigma, wc);
    const EstimateReport a = adaptive_estimate(s, wc, cfg.s_bound);
    oracle.row(static_cast<Eigen::Index>(r)) = o.estimate.transpose();
    adaptive.row(static_cast<Eigen::Index>(r)) = a.estimate.transpose();
    clamps[r] = a.diagnostics.clamp_events;
  });

  const double rate = std::pow(n, 0.5 / spec.delta());
  const Vector truth = vec(sigma.matrix());
  const Matrix target = optimal_covariance(sigma, spec.delta(), spec.zeta_limit(), eta);
  const bool use_oracle = cfg.estimator == "oracle";

  McReport rep;
  rep.kind = to_string(cfg.kind);
  rep.config = cfg.echo();
  rep.config.emplace_back("run.n", format_double(n));
  rep.seed = cfg.seed;
  rep.replications = cfg.replications;
  rep.n = n;
  rep.rate = rate;
  rep.truth = truth;
  rep.estimates = use_oracle ? oracle : adaptive;
  rep.covariance_target = target;
  summarise(rep);

  McReport other = rep;
  other.estimates = use_oracle ? adaptive : oracle;
  summarise(other);

  std::vector<double> gaps(reps);
  for (std::size_t r = 0; r < reps; ++r)
    gaps[r] = rate * (adaptive.row(static_cast<Eigen::Index>(r)) - oracle.row(static_cast<Eigen::Index>(r))).norm();
  long long clamp_total = 0;
  for (int c : clamps) clamp_total += c;

  // Finite-n bound over the same window, standardised like the estimates.
  const Matrix finite = rate * rate * quarter_inverse_z(fisher_window(model, w).info);

  rep.extras["estimator"] = cfg.estimator;
  rep.extras["window"] = {{"lo", w.lo}, {"hi", w.hi}, {"centre", balance_centre(model)}};
  rep.extras["median_gap_ad_or"] = median(gaps);
  rep.extras["rel_frobenius_error_" + std::string(use_oracle ? "adaptive" : "oracle")] = other.rel_frobenius_error;
  rep.extras["covariance_target_window"] = to_json(finite);
  rep.extras["rel_frobenius_error_window"] = rel_frobenius(rep.covariance_empirical, finite);
  rep.extras["clamp_events"] = clamp_total;
  rep.wall_ms = clock.ms();
  return rep;
}

/// Components of the observation schedule described by the config.
inline ObservationSchedule schedule_from(const ExperimentConfig& cfg, Eigen::Index d) {
  ObservationSchedule s;
  for (Eigen::Index j = 0; j < d; ++j)
    s.components.push_back({static_cast<long long>(std::llround(cfg.component(cfg.n, j))), cfg.component(cfg.eta, j),
                            cfg.component(cfg.w, j)});
  s.validate();
  return s;
}

/// Largest frequency any block window touches.
inline long long block_p_max(const BlockModel& bm, const BlockWindowRule& rule) {
  long long p = 1;
  for (int k = 0; k < bm.m; ++k)
    p = std::max(p, rule.window.resolve(block_window_centre(bm, k, bm.s_bound), bm.n_min).hi);
  return p;
}

/// Integrated covolatility over blocks, fast (block sequence) or end-to-end
/// (asynchronous ticks) path.
inline McReport run_mc_semiparametric(const ExperimentConfig& cfg) {
  require(cfg.kind == ExperimentKind::McSemiparametric,
          "run_mc_semiparametric: experiment kind must be mc-semiparametric");
  cfg.validate();
  check_replications(cfg);
  const WallClock clock;
  const LinearSigmaPath path{cfg.sigma_matrix(), cfg.slope_matrix()};
  const Eigen::Index d = path.base.rows();
  const ObservationSchedule schedule = schedule_from(cfg, d);
  const BlockModel bm = BlockModel::build(path, schedule, cfg.m, cfg.s_bound);
  const BlockWindowRule rule{cfg.window(), cfg.pool};
  const long long p_max = block_p_max(bm, rule);
  const bool end_to_end = cfg.path == "end-to-end";
  const auto reps = static_cast<std::size_t>(cfg.replications);

  std::optional<AsyncSampler> sampler;
  if (end_to_end) sampler.emplace(bm, schedule, cfg.grid_factor * schedule.n_max());

  Matrix est(static_cast<Eigen::Index>(reps), d * d);
  std::vector<int> clamps(reps, 0);
  parallel_for(reps, cfg.threads, [&](std::size_t r) {
    BlockSeqSample blocks;
    if (end_to_end) {
      RngStream rng(cfg.seed, r, 0, Purpose::Path);
      blocks = block_coeffs_from_ticks(sampler->draw(rng), bm, p_max);
    } else {
      RngStream rng(cfg.seed, r, 0, Purpose::Block);
      blocks = sample_block_sequence(bm, p_max, rng);
    }
    const IntegratedReport ir = integrated_covol_estimate(blocks, rule, cfg.s_bound);
    est.row(static_cast<Eigen::Index>(r)) = ir.summary.estimate.transpose();
    clamps[r] = ir.summary.diagnostics.clamp_events;
  });

  Matrix riemann = Matrix::Zero(d, d);
  for (const auto& s : bm.sigma) riemann += s.matrix();
  riemann /= bm.m;

  McReport rep;
  rep.kind = to_string(cfg.kind);
  rep.config = cfg.echo();
  rep.seed = cfg.seed;
  rep.replications = cfg.replications;
  rep.n = bm.n_min;
  rep.rate = std::pow(bm.n_min, 0.25);
  rep.truth = vec(path.integral());
  rep.estimates = est;
  rep.covariance_target = integrated_bound(bm);
  summarise(rep);

  const Vector riemann_v = vec(riemann);
  Vector z_riemann(riemann_v.size());
  for (Eigen::Index j = 0; j < z_riemann.size(); ++j)
    z_riemann(j) = rep.mean_se(j) > 0.0 ? (rep.mean(j) - riemann_v(j)) / rep.mean_se(j) : 0.0;
  long long clamp_total = 0;
  for (int c : clamps) clamp_total += c;

  rep.extras["path"] = cfg.path;
  rep.extras["blocks"] = bm.m;
  rep.extras["p_max"] = p_max;
  rep.extras["riemann_target"] = to_json(riemann_v);
  rep.extras["z_scores_riemann"] = to_json(z_riemann);
  rep.extras["clamp_events"] = clamp_total;
  if (end_to_end) rep.extras["path_points"] = static_cast<long long>(sampler->path_points());
  rep.wall_ms = clock.ms();
  return rep;
}

}  // namespace covest::bench
