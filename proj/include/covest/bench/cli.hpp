#pragma once

// Command-line front end: fisher, simulate, estimate, mc, lan, equiv.
// Settings are layered: built-in defaults, then --config, then --set
// key=value pairs, then dedicated flags. Exit codes: 0 ok, 1 validation,
// 2 numerical/runtime. Errors go to stderr as one JSON object.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "covest/bench/config.hpp"
#include "covest/bench/mc.hpp"
#include "covest/bench/report.hpp"
#include "covest/errors.hpp"
#include "covest/estimate.hpp"
#include "covest/fisher.hpp"
#include "covest/lan.hpp"
#include "covest/simulate.hpp"

namespace covest::bench {

inline Kernel parse_kernel(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "bm") return Kernel::bm();
  if (head == "bb") return Kernel::bb();
  if (head == "ou") return arg.empty() ? Kernel::ou() : Kernel::ou(parse_list(arg, "simulate.kernel").front());
  if (head == "fbm") {
    require(!arg.empty(), "simulate.kernel: fbm needs a Hurst index, e.g. fbm:0.7");
    return Kernel::fbm(parse_list(arg, "simulate.kernel").front());
  }
  throw ValidationError("simulate.kernel: unknown kernel '" + text + "' (bm|bb|ou[:beta]|fbm:H)");
}

/// Reads "p,y_1,..,y_d" rows with p = 1, 2, ... in order.
inline Matrix read_sequence_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "estimate: input CSV is empty");
  std::vector<std::vector<double>> rows;
  long long expect = 1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<double> v = parse_list(line, "estimate: input row " + std::to_string(expect));
    require(v.size() >= 2, "estimate: each row needs p and at least one coordinate");
    require(v.front() == static_cast<double>(expect), "estimate: rows must list p = 1, 2, ... in order");
    require(rows.empty() || v.size() == rows.front().size() + 1, "estimate: ragged input rows");
    rows.emplace_back(v.begin() + 1, v.end());
    ++expect;
  }
  require(!rows.empty(), "estimate: input CSV has no data rows");
  Matrix y(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t p = 0; p < rows.size(); ++p)
    for (std::size_t j = 0; j < rows[p].size(); ++j)
      y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p)) = rows[p][j];
  return y;
}

inline void write_sequence_csv(std::ostream& os, const SeqSample& s) {
  os << 'p';
  for (Eigen::Index j = 0; j < s.values.rows(); ++j) os << ",y_" << j + 1;
  os << '\n';
  for (Eigen::Index p = 0; p < s.values.cols(); ++p) {
    os << p + 1;
    for (Eigen::Index j = 0; j < s.values.rows(); ++j) os << ',' << format_double(s.values(j, p));
    os << '\n';
  }
}

namespace detail {

struct Sink {
  std::string path;
  std::ostream& fallback;

  void write(const std::string& text, const std::string& suffix = "") const {
    if (path.empty()) {
      fallback << text;
      return;
    }
    std::ofstream f(path + suffix, std::ios::binary);
    if (!f) throw NumericalError("cannot open output file '" + path + suffix + "'");
    f << text;
  }
};

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"covest: efficient covariance estimation under noise, simulation and Monte Carlo checks"};
  app.fallthrough();
  app.require_subcommand(1);
  app.footer(defaults_help());

  std::string config_path;
  std::vector<std::string> sets;
  std::string seed;
  std::string threads;
  std::string out_path;
  std::string format;
  bool force = false;
  bool timing = false;
  app.add_option("--config", config_path, "INI config file");
  app.add_option("--set", sets, "override key=value (repeatable), e.g. --set mc.replications=500");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out_path, "output file (default stdout)");
  app.add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--threads", threads, "worker threads");
  app.add_flag("--force", force, "allow R < 100");
  app.add_flag("--timing", timing, "embed wall_ms in the report instead of a .timing.json sidecar");

  // Dedicated flags mapped onto config keys.
  const std::vector<std::pair<std::string, std::string>> mapped = {
      {"--kind", "experiment.kind"},     {"--spectrum", "model.spectrum"},  {"--d", "model.d"},
      {"--sigma", "model.sigma"},        {"--slope", "model.sigma_slope"},  {"--eta", "model.eta"},
      {"--n", "model.n"},                {"--w", "model.w"},                {"--m", "model.m"},
      {"--s-bound", "model.s_bound"},    {"--a", "window.a"},               {"--b", "window.b"},
      {"--split", "window.split"},       {"--pool", "window.pool"},         {"--replications", "mc.replications"},
      {"--estimator", "mc.estimator"},   {"--path", "mc.path"},             {"--direction", "lan.h"},
      {"--spectrum2", "equiv.spectrum2"}, {"--kernel", "equiv.kernel"},     {"--what", "simulate.what"},
      {"--sim-kernel", "simulate.kernel"}, {"--backend", "simulate.backend"}, {"--p-max", "simulate.p_max"}};
  std::map<std::string, std::string> mapped_values;
  for (const auto& [flag, key] : mapped) app.add_option(flag, mapped_values[key], "sets " + key);

  std::string mode = "closed";
  std::string input;
  auto* fisher = app.add_subcommand("fisher", "asymptotic Fisher information and the bound 1/4 I^-1 Z");
  fisher->add_option("--mode", mode, "closed or quadrature")->check(CLI::IsMember({"closed", "quadrature"}));
  auto* simulate = app.add_subcommand("simulate", "dump a simulated sample as CSV (sequence, discrete or ticks)");
  auto* estimate = app.add_subcommand("estimate", "oracle/adaptive estimate from a sequence CSV or a seeded draw");
  estimate->add_option("--input", input, "CSV with header p,y_1,..,y_d");
  auto* mc = app.add_subcommand("mc", "Monte Carlo run (mc-parametric or mc-semiparametric)");
  auto* lan = app.add_subcommand("lan", "log-likelihood ratio diagnostic");
  auto* equiv = app.add_subcommand("equiv", "Hellinger-bound trend between two spectra");

  auto fail = [&](const std::string& type, const std::string& msg, int code) {
    err << Json{{"error", {{"type", type}, {"message", msg}, {"exit_code", code}}}}.dump() << '\n';
    return code;
  };

  if (argc <= 1) {
    err << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    return fail("usage", e.what(), 1);
  }

  try {
    ExperimentConfig cfg;
    if (mc->parsed()) cfg.kind = ExperimentKind::McParametric;
    if (lan->parsed()) cfg.kind = ExperimentKind::Lan;
    if (equiv->parsed()) cfg.kind = ExperimentKind::EquivalenceTrend;
    if (fisher->parsed()) cfg.kind = ExperimentKind::FisherTable;
    if (simulate->parsed() || estimate->parsed()) cfg.kind = ExperimentKind::SimulateDump;
    if (!config_path.empty()) load_ini(cfg, config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      require(eq != std::string::npos, "--set: expected key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, val] : mapped_values)
      if (!val.empty()) cfg.set(key, val);
    if (!seed.empty()) cfg.set("mc.seed", seed);
    if (!threads.empty()) cfg.set("mc.threads", threads);
    if (!out_path.empty()) cfg.out = out_path;
    if (!format.empty()) cfg.format = format;
    if (force) cfg.force = true;
    const detail::Sink sink{cfg.out, out};

    if (fisher->parsed()) {
      cfg.validate();
      const Spectrum spec = cfg.spectrum_obj();
      const SymMatrix sigma(cfg.sigma_matrix());
      const double eta = cfg.eta.front();
      const auto am = mode == "closed" ? AsymptoticMode::ClosedForm : AsymptoticMode::Quadrature;
      const FisherInfo f = asymptotic_fisher(sigma, spec.delta(), spec.zeta_limit(), eta, am);
      Json j;
      j["spectrum"] = spec.name();
      j["delta"] = spec.delta();
      j["zeta"] = spec.zeta_limit();
      j["eta"] = eta;
      j["sigma"] = to_json(sigma.matrix());
      j["mode"] = mode;
      j["fisher"] = to_json(f.info);
      j["bound"] = to_json(quarter_inverse_z(f.info));
      sink.write(detail::dump(j));
      return 0;
    }

    if (simulate->parsed()) {
      cfg.validate();
      std::ostringstream os;
      if (cfg.what == "sequence") {
        const SymMatrix sigma(cfg.sigma_matrix());
        const double eta = cfg.eta.front();
        const ParamModel model(sigma, eta * eta, cfg.n.front(), cfg.spectrum_obj(), cfg.s_bound);
        const long long p = cfg.p_max > 0 ? cfg.p_max : cfg.window().resolve(balance_centre(model), model.n).hi;
        RngStream rng(cfg.seed, 0, 0, Purpose::Signal);
        write_sequence_csv(os, sample_sequence(model, p, rng));
      } else if (cfg.what == "discrete") {
        const SymMatrix sigma(cfg.sigma_matrix());
        const double eta = cfg.eta.front();
        const auto backend = cfg.backend == "kl" ? DiscreteBackend::KarhunenLoeve : DiscreteBackend::Dense;
        RngStream rng(cfg.seed, 0, 0, Purpose::Signal);
        const auto n = static_cast<Eigen::Index>(std::llround(cfg.n.front()));
        write_discrete_csv(os, sample_discrete(sigma, parse_kernel(cfg.sim_kernel), n, eta * eta, rng, backend));
      } else {
        const LinearSigmaPath path{cfg.sigma_matrix(), cfg.slope_matrix()};
        const ObservationSchedule schedule = schedule_from(cfg, path.base.rows());
        const BlockModel bm = BlockModel::build(path, schedule, cfg.m, cfg.s_bound);
        RngStream rng(cfg.seed, 0, 0, Purpose::Path);
        write_ticks_csv(os, sample_async(bm, schedule, cfg.grid_factor * schedule.n_max(), rng));
      }
      sink.write(os.str());
      return 0;
    }

    if (estimate->parsed()) {
      cfg.validate();
      const SymMatrix sigma(cfg.sigma_matrix());
      const double eta = cfg.eta.front();
      const ParamModel model(sigma, eta * eta, cfg.n.front(), cfg.spectrum_obj(), cfg.s_bound);
      const WindowConfig wc = cfg.window();
      SeqSample s{model, 0, Matrix(), StreamId{cfg.seed, 0, 0, Purpose::Signal}};
      if (!input.empty()) {
        std::ifstream f(input);
        require(static_cast<bool>(f), "estimate: cannot open input '" + input + "'");
        s.values = read_sequence_csv(f);
        require(s.values.rows() == sigma.dim(), "estimate: input dimension differs from model.sigma");
        s.p_max = s.values.cols();
      } else {
        RngStream rng(s.seed);
        s = sample_sequence(model, wc.resolve(balance_centre(model), model.n).hi, rng);
      }
      const EstimateReport r =
          cfg.estimator == "oracle" ? oracle_estimate(s, sigma, wc) : adaptive_estimate(s, wc, cfg.s_bound);
      Json j;
      j["config"] = config_json(cfg.echo());
      j["estimator"] = cfg.estimator;
      j["p_max"] = s.p_max;
      j["report"] = to_json(r);
      sink.write(detail::dump(j));
      return 0;
    }

    if (mc->parsed()) {
      if (cfg.kind != ExperimentKind::McSemiparametric) cfg.kind = ExperimentKind::McParametric;
      cfg.validate();
      std::vector<McReport> reps;
      if (cfg.kind == ExperimentKind::McSemiparametric)
        reps.push_back(run_mc_semiparametric(cfg));
      else
        for (double n : cfg.n) reps.push_back(run_mc_parametric(cfg, n));
      double wall = 0.0;
      for (const auto& r : reps) wall += r.wall_ms;
      if (cfg.format == "csv") {
        for (std::size_t i = 0; i < reps.size(); ++i) {
          const std::string tag = reps.size() > 1 ? "." + std::to_string(i) : "";
          std::ostringstream rows;
          std::ostringstream summary;
          write_estimates_csv(rows, reps[i]);
          write_summary_csv(summary, reps[i]);
          if (cfg.out.empty()) {
            out << summary.str();
          } else {
            sink.write(rows.str(), tag);
            sink.write(summary.str(), tag + ".summary.csv");
          }
        }
      } else {
        Json j;
        if (reps.size() == 1) {
          j = to_json(reps.front(), cfg.keep_estimates, timing);
        } else {
          j["runs"] = Json::array();
          Json gaps = Json::array();
          for (const auto& r : reps) {
            j["runs"].push_back(to_json(r, cfg.keep_estimates, timing));
            gaps.push_back(r.extras.at("median_gap_ad_or"));
          }
          j["median_gap_ad_or"] = gaps;
        }
        sink.write(detail::dump(j));
      }
      if (!timing && !cfg.out.empty()) sink.write(detail::dump(Json{{"wall_ms", wall}}), ".timing.json");
      return 0;
    }

    if (lan->parsed()) {
      cfg.validate();
      const WallClock clock;
      const SymMatrix sigma(cfg.sigma_matrix());
      const double eta = cfg.eta.front();
      const LanReport r = lan_diagnostic(sigma, parse_matrix(cfg.h, sigma.dim()), cfg.n.front(), cfg.spectrum_obj(),
                                         cfg.replications, cfg.seed, eta * eta, cfg.threads);
      Json j;
      j["config"] = config_json(cfg.echo());
      j["lan"] = to_json(r);
      j["seed"] = cfg.seed;
      if (timing) j["wall_ms"] = clock.ms();
      sink.write(detail::dump(j));
      if (!timing && !cfg.out.empty()) sink.write(detail::dump(Json{{"wall_ms", clock.ms()}}), ".timing.json");
      return 0;
    }

    if (equiv->parsed()) {
      cfg.validate();
      const DistanceTrend t =
          spectrum_distance_trend(cfg.spectrum_obj(), Spectrum::parse(cfg.spectrum2), SymMatrix(cfg.sigma_matrix()),
                                  cfg.eta.front(), cfg.n, parse_distance_kernel(cfg.kernel));
      Json j;
      j["config"] = config_json(cfg.echo());
      j["trend"] = to_json(t);
      sink.write(detail::dump(j));
      return 0;
    }
    return fail("usage", "no subcommand", 1);
  } catch (const ValidationError& e) {
    return fail("validation", e.what(), 1);
  } catch (const NumericalError& e) {
    return fail("numerical", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 2);
  }
}

}  // namespace covest::bench
