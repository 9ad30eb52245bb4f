#pragma once

// Report types and their JSON / CSV encodings. Writers never round: JSON uses
// the shortest round-trip form and CSV prints 17 significant digits, so both
// decode to the same doubles.

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "covest/bench/config.hpp"
#include "covest/fisher.hpp"
#include "covest/lan.hpp"

namespace covest::bench {

using Json = nlohmann::ordered_json;

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

/// Moments of the rows of X (replications x components), accumulated in row order.
struct SampleStats {
  Vector mean;
  Matrix cov;
  Vector skewness;
  Vector excess_kurtosis;
};

inline SampleStats sample_stats(const Matrix& x) {
  const Eigen::Index r = x.rows();
  const Eigen::Index k = x.cols();
  require(r >= 2, "statistics need at least two replications");
  SampleStats s;
  s.mean = Vector::Zero(k);
  for (Eigen::Index i = 0; i < r; ++i) s.mean += x.row(i).transpose();
  s.mean /= static_cast<double>(r);
  s.cov = Matrix::Zero(k, k);
  Vector m3 = Vector::Zero(k);
  Vector m4 = Vector::Zero(k);
  for (Eigen::Index i = 0; i < r; ++i) {
    const Vector c = x.row(i).transpose() - s.mean;
    s.cov.noalias() += c * c.transpose();
    m3 += c.array().cube().matrix();
    m4 += c.array().square().square().matrix();
  }
  const double rr = static_cast<double>(r);
  Vector m2 = s.cov.diagonal() / rr;
  s.cov /= rr - 1.0;
  s.skewness = Vector::Zero(k);
  s.excess_kurtosis = Vector::Zero(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (m2(j) <= 0.0) continue;
    s.skewness(j) = m3(j) / rr / std::pow(m2(j), 1.5);
    s.excess_kurtosis(j) = m4(j) / rr / (m2(j) * m2(j)) - 3.0;
  }
  return s;
}

struct McReport {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;
  long long replications = 0;
  double n = 0;
  double rate = 0;                 // standardisation factor applied to (estimate - truth)
  Vector truth;
  Vector mean;                     // mean raw estimate
  Matrix estimates;                // replications x d^2, raw
  Matrix covariance_empirical;
  Matrix covariance_target;
  double rel_frobenius_error = 0;
  Vector z_scores;                 // mean error / MC standard error
  Vector mean_se;                  // MC standard error of the raw mean
  SampleStats stats;
  Json extras = Json::object();
  double wall_ms = 0;
};

/// Fills every statistic from `estimates`, `truth`, `rate` and the target.
inline void summarise(McReport& rep) {
  const Eigen::Index r = rep.estimates.rows();
  Matrix x = rep.estimates;
  for (Eigen::Index i = 0; i < r; ++i) x.row(i) = rep.rate * (x.row(i) - rep.truth.transpose());
  rep.stats = sample_stats(x);
  rep.mean = rep.truth + rep.stats.mean / rep.rate;
  rep.covariance_empirical = rep.stats.cov;
  rep.rel_frobenius_error = rel_frobenius(rep.covariance_empirical, rep.covariance_target);
  const Vector sd = rep.stats.cov.diagonal().cwiseSqrt();
  rep.mean_se = sd / (rep.rate * std::sqrt(static_cast<double>(r)));
  rep.z_scores = Vector::Zero(sd.size());
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    rep.z_scores(j) = sd(j) > 0.0 ? rep.stats.mean(j) / (sd(j) / std::sqrt(static_cast<double>(r))) : 0.0;
}

inline Json config_json(const std::vector<std::pair<std::string, std::string>>& echo) {
  Json c = Json::object();
  for (const auto& [k, v] : echo) c[k] = v;
  return c;
}

inline Json to_json(const McReport& rep, bool with_estimates, bool with_timing) {
  Json j;
  j["config"] = config_json(rep.config);
  if (with_estimates) j["estimates"] = to_json(rep.estimates);
  j["n"] = rep.n;
  j["replications"] = rep.replications;
  j["standardisation"] = rep.rate;
  j["truth"] = to_json(rep.truth);
  j["mean"] = to_json(rep.mean);
  j["mean_se"] = to_json(rep.mean_se);
  j["covariance_empirical"] = to_json(rep.covariance_empirical);
  j["covariance_target"] = to_json(rep.covariance_target);
  j["rel_frobenius_error"] = rep.rel_frobenius_error;
  j["z_scores"] = to_json(rep.z_scores);
  const double rr = static_cast<double>(rep.replications);
  j["normality"] = {{"skewness", to_json(rep.stats.skewness)},
                    {"skewness_se", std::sqrt(6.0 / rr)},
                    {"excess_kurtosis", to_json(rep.stats.excess_kurtosis)},
                    {"excess_kurtosis_se", std::sqrt(24.0 / rr)}};
  j["seed"] = rep.seed;
  j["extras"] = rep.extras;
  if (with_timing) j["wall_ms"] = rep.wall_ms;
  return j;
}

inline std::string csv_number(double v) { return format_double(v); }

/// One row per replication: replication index and the flattened raw estimate.
inline void write_estimates_csv(std::ostream& os, const McReport& rep) {
  os << "replication";
  for (Eigen::Index j = 0; j < rep.estimates.cols(); ++j) os << ",theta_" << j + 1;
  os << '\n';
  for (Eigen::Index i = 0; i < rep.estimates.rows(); ++i) {
    os << i;
    for (Eigen::Index j = 0; j < rep.estimates.cols(); ++j) os << ',' << csv_number(rep.estimates(i, j));
    os << '\n';
  }
}

/// Summary footer: field,row,col,value with row/col empty for scalars.
inline void write_summary_csv(std::ostream& os, const McReport& rep) {
  os << "field,row,col,value\n";
  auto scalar = [&](const std::string& f, double v) { os << f << ",,," << csv_number(v) << '\n'; };
  auto vector = [&](const std::string& f, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) os << f << ',' << i << ",," << csv_number(v(i)) << '\n';
  };
  auto matrix = [&](const std::string& f, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) os << f << ',' << i << ',' << j << ',' << csv_number(m(i, j)) << '\n';
  };
  scalar("n", rep.n);
  scalar("replications", static_cast<double>(rep.replications));
  scalar("seed", static_cast<double>(rep.seed));
  scalar("standardisation", rep.rate);
  vector("truth", rep.truth);
  vector("mean", rep.mean);
  vector("mean_se", rep.mean_se);
  matrix("covariance_empirical", rep.covariance_empirical);
  matrix("covariance_target", rep.covariance_target);
  scalar("rel_frobenius_error", rep.rel_frobenius_error);
  vector("z_scores", rep.z_scores);
  vector("skewness", rep.stats.skewness);
  vector("excess_kurtosis", rep.stats.excess_kurtosis);
}

inline Json to_json(const FisherInfo& f) {
  return {{"d", f.d},
          {"kind", to_string(f.kind)},
          {"includes_z", f.includes_z},
          {"p_lo", f.p_lo},
          {"p_hi", f.p_hi},
          {"info", to_json(f.info)}};
}

inline Json to_json(const LanReport& r) {
  Json j;
  j["n"] = r.n;
  j["h"] = to_json(r.h);
  j["replications"] = r.replications;
  j["p_max"] = r.p_max;
  j["r_n"] = r.r_n;
  j["mean"] = r.mean;
  j["variance"] = r.variance;
  j["mean_se"] = r.mean_se;
  j["cv_mean"] = r.cv_mean;
  j["exact_mean"] = r.exact_mean;
  j["exact_variance"] = r.exact_variance;
  j["target_mean"] = r.target_mean;
  j["target_variance"] = r.target_variance;
  j["lan_gap"] = r.lan_gap;
  return j;
}

inline Json to_json(const DistanceTrend& t) {
  Json j;
  j["spectrum1"] = t.spec1;
  j["spectrum2"] = t.spec2;
  j["kernel"] = to_string(t.kernel);
  Json pts = Json::array();
  for (const auto& p : t.points)
    pts.push_back({{"n", p.n},
                   {"p_max", p.p_max},
                   {"identity", p.identity},
                   {"rescale", p.rescale},
                   {"best", p.best},
                   {"value", p.value(t.kernel)}});
  j["points"] = pts;
  j["verdict"] = t.verdict;
  return j;
}

inline Json to_json(const EstimateReport& r) {
  Json j;
  j["estimate"] = to_json(r.estimate);
  j["covariance"] = to_json(r.covariance);
  j["window"] = {{"lo", r.window.lo}, {"hi", r.window.hi}, {"split", to_string(r.split)}};
  if (r.pre_estimate.size() > 0) j["pre_estimate"] = to_json(r.pre_estimate);
  j["diagnostics"] = {{"clamp_events", r.diagnostics.clamp_events},
                      {"occupancy", r.diagnostics.occupancy},
                      {"pre_occupancy", r.diagnostics.pre_occupancy}};
  return j;
}

}  // namespace covest::bench
