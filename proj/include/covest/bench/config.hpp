#pragma once

// Experiment configuration: a flat INI file with one section per module.
// Every key has a default; unknown keys are rejected so typos cannot slip
// through silently.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "covest/errors.hpp"
#include "covest/estimate.hpp"
#include "covest/lan.hpp"
#include "covest/spectra.hpp"

namespace covest::bench {

enum class ExperimentKind { McParametric, McSemiparametric, Lan, FisherTable, EquivalenceTrend, SimulateDump };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::McParametric: return "mc-parametric";
    case ExperimentKind::McSemiparametric: return "mc-semiparametric";
    case ExperimentKind::Lan: return "lan";
    case ExperimentKind::FisherTable: return "fisher-table";
    case ExperimentKind::EquivalenceTrend: return "equivalence-trend";
    case ExperimentKind::SimulateDump: return "simulate-dump";
  }
  return "?";
}

inline ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::McParametric, ExperimentKind::McSemiparametric, ExperimentKind::Lan,
                 ExperimentKind::FisherTable, ExperimentKind::EquivalenceTrend, ExperimentKind::SimulateDump})
    if (to_string(k) == s) return k;
  throw ValidationError("experiment.kind: unknown kind '" + s + "'");
}

/// Parses "1,0.5;0.5,1" (rows separated by ';') or a scalar c meaning c I_d.
inline Matrix parse_matrix(const std::string& text, Eigen::Index d_hint) {
  std::vector<std::vector<double>> rows;
  std::stringstream rs(text);
  std::string row;
  while (std::getline(rs, row, ';')) {
    std::vector<double> vals;
    std::stringstream cs(row);
    std::string cell;
    while (std::getline(cs, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        require(cell.find_first_not_of(" \t", used) == std::string::npos, "");
      } catch (const std::exception&) {
        throw ValidationError("matrix: cannot parse '" + cell + "' in '" + text + "'");
      }
    }
    rows.push_back(vals);
  }
  require(!rows.empty() && !rows.front().empty(), "matrix: empty specification");
  if (rows.size() == 1 && rows.front().size() == 1) {
    require(d_hint >= 1, "matrix: scalar form needs model.d >= 1");
    return rows.front().front() * Matrix::Identity(d_hint, d_hint);
  }
  const auto d = static_cast<Eigen::Index>(rows.size());
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    require(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) == d, "matrix: must be square");
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ValidationError(key + ": cannot parse '" + cell + "'");
    }
  }
  require(!out.empty(), key + ": empty list");
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

inline std::string format_matrix(const Matrix& m) {
  std::string s;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) s += ';';
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += (j ? "," : "") + format_double(m(i, j));
  }
  return s;
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::McParametric;

  // [model]
  std::string spectrum = "bm";
  Eigen::Index d = 2;
  std::string sigma = "1,0.5;0.5,1";
  std::string sigma_slope = "0";
  std::vector<double> eta = {1.0};
  std::vector<double> n = {1e6};
  std::vector<double> w = {0.0};
  int m = 50;
  double s_bound = 2.0;

  // [window]
  double window_a = 0.0;
  double window_b = 0.0;
  std::string split = "crossfit";
  int pool = -1;

  // [mc]
  long long replications = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string estimator = "adaptive";
  std::string path = "fast";
  int grid_factor = 8;
  bool force = false;
  bool keep_estimates = false;

  // [lan]
  std::string h = "1";

  // [equiv]
  std::string spectrum2 = "bb";
  std::string kernel = "best";

  // [simulate]
  std::string what = "sequence";
  std::string sim_kernel = "bm";
  std::string backend = "dense";
  long long p_max = 0;

  // [output]
  std::string out;
  std::string format = "json";

  Spectrum spectrum_obj() const { return Spectrum::parse(spectrum); }
  Matrix sigma_matrix() const { return parse_matrix(sigma, d); }
  Matrix slope_matrix() const {
    const Matrix base = sigma_matrix();
    const Matrix s = parse_matrix(sigma_slope, base.rows());
    require(s.rows() == base.rows(), "model.sigma_slope: dimension differs from model.sigma");
    return s;
  }
  WindowConfig window() const { return {window_a, window_b, parse_split(split)}; }

  /// eta / n / w lists: length 1 broadcasts over components.
  double component(const std::vector<double>& v, Eigen::Index j) const {
    return v.size() == 1 ? v.front() : v[static_cast<std::size_t>(j)];
  }

  /// Resolved configuration as ordered key/value pairs; the report echo.
  std::vector<std::pair<std::string, std::string>> echo() const {
    return {{"experiment.kind", to_string(kind)},
            {"model.spectrum", spectrum},
            {"model.d", std::to_string(d)},
            {"model.sigma", sigma},
            {"model.sigma_slope", sigma_slope},
            {"model.eta", format_list(eta)},
            {"model.n", format_list(n)},
            {"model.w", format_list(w)},
            {"model.m", std::to_string(m)},
            {"model.s_bound", format_double(s_bound)},
            {"window.a", format_double(window_a)},
            {"window.b", format_double(window_b)},
            {"window.split", split},
            {"window.pool", std::to_string(pool)},
            {"mc.replications", std::to_string(replications)},
            {"mc.seed", std::to_string(seed)},
            {"mc.estimator", estimator},
            {"mc.path", path},
            {"mc.grid_factor", std::to_string(grid_factor)},
            {"mc.keep_estimates", keep_estimates ? "true" : "false"},
            {"lan.h", h},
            {"equiv.spectrum2", spectrum2},
            {"equiv.kernel", kernel},
            {"simulate.what", what},
            {"simulate.kernel", sim_kernel},
            {"simulate.backend", backend},
            {"simulate.p_max", std::to_string(p_max)}};
  }

  /// Sets one key. Throws ValidationError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value) {
    auto num = [&](const std::string& v) {
      try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        require(used == v.size(), "");
        return x;
      } catch (const std::exception&) {
        throw ValidationError(key + ": expected a number, got '" + v + "'");
      }
    };
    auto integer = [&](const std::string& v) {
      const double x = num(v);
      require(x == std::floor(x), key + ": expected an integer, got '" + v + "'");
      return static_cast<long long>(x);
    };
    auto boolean = [&](const std::string& v) {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw ValidationError(key + ": expected true or false, got '" + v + "'");
    };
    if (key == "experiment.kind") kind = parse_kind(value);
    else if (key == "model.spectrum") spectrum = value;
    else if (key == "model.d") d = integer(value);
    else if (key == "model.sigma") sigma = value;
    else if (key == "model.sigma_slope") sigma_slope = value;
    else if (key == "model.eta") eta = parse_list(value, key);
    else if (key == "model.n") n = parse_list(value, key);
    else if (key == "model.w") w = parse_list(value, key);
    else if (key == "model.m") m = static_cast<int>(integer(value));
    else if (key == "model.s_bound") s_bound = num(value);
    else if (key == "window.a") window_a = num(value);
    else if (key == "window.b") window_b = num(value);
    else if (key == "window.split") split = value;
    else if (key == "window.pool") pool = static_cast<int>(integer(value));
    else if (key == "mc.replications") replications = integer(value);
    else if (key == "mc.seed") seed = static_cast<std::uint64_t>(integer(value));
    else if (key == "mc.threads") threads = static_cast<unsigned>(integer(value));
    else if (key == "mc.estimator") estimator = value;
    else if (key == "mc.path") path = value;
    else if (key == "mc.grid_factor") grid_factor = static_cast<int>(integer(value));
    else if (key == "mc.force") force = boolean(value);
    else if (key == "mc.keep_estimates") keep_estimates = boolean(value);
    else if (key == "lan.h") h = value;
    else if (key == "equiv.spectrum2") spectrum2 = value;
    else if (key == "equiv.kernel") kernel = value;
    else if (key == "simulate.what") what = value;
    else if (key == "simulate.kernel") sim_kernel = value;
    else if (key == "simulate.backend") backend = value;
    else if (key == "simulate.p_max") p_max = integer(value);
    else if (key == "output.out") out = value;
    else if (key == "output.format") format = value;
    else throw ValidationError("config: unknown key '" + key + "'");
  }

  /// Checks every field against the preconditions of the module that will
  /// consume it; the first violated constraint is reported.
  void validate() const {
    const Spectrum spec = spectrum_obj();
    require(d >= 1, "model.d: must be >= 1");
    const Matrix s = sigma_matrix();
    const Eigen::Index dd = s.rows();
    require((s - s.transpose()).norm() == 0.0, "model.sigma: must be symmetric");
    // n is a per-component list only for the block model; elsewhere it is a sweep
    for (const auto* list : {&eta, &w})
      require(list->size() == 1 || static_cast<Eigen::Index>(list->size()) == dd,
              "model: eta and w lists need length 1 or d");
    if (kind == ExperimentKind::McSemiparametric)
      require(n.size() == 1 || static_cast<Eigen::Index>(n.size()) == dd, "model.n: need length 1 or d");
    for (double e : eta) require(e > 0.0, "model.eta: must be > 0");
    for (double x : n) require(x >= 2.0, "model.n: must be >= 2");
    for (double x : w) require(x >= 0.0 && x < 1.0, "model.w: must lie in [0, 1)");
    require(s_bound > 1.0, "model.s_bound: must be > 1");
    window().validate();
    require(replications >= 1, "mc.replications: R must be >= 1");
    require(replications >= 100 || force || (kind != ExperimentKind::McParametric && kind != ExperimentKind::McSemiparametric),
            "mc.replications: R < 100 is statistically meaningless; pass --force to run anyway");
    require(threads >= 1, "mc.threads: must be >= 1");
    require(estimator == "oracle" || estimator == "adaptive", "mc.estimator: must be oracle or adaptive");
    require(path == "fast" || path == "end-to-end", "mc.path: must be fast or end-to-end");
    require(grid_factor >= 4, "mc.grid_factor: must be >= 4");
    require(format == "json" || format == "csv", "output.format: must be json or csv");
    parse_distance_kernel(kernel);
    require(what == "sequence" || what == "discrete" || what == "ticks", "simulate.what: sequence|discrete|ticks");
    require(backend == "dense" || backend == "kl", "simulate.backend: must be dense or kl");
    require(p_max >= 0, "simulate.p_max: must be >= 0");
    if (kind == ExperimentKind::McSemiparametric) {
      require(m >= 1, "model.m: must be >= 1");
      const double nmin = *std::min_element(n.begin(), n.end());
      require(static_cast<double>(m) < std::sqrt(nmin), "model.m: need m < sqrt(n_min)");
      require(slope_matrix().rows() == dd, "model.sigma_slope: dimension differs from model.sigma");
    } else {
      const SymMatrix sym(s);
      require(sym.is_positive_definite(), "model.sigma: must be positive definite");
      require(sym.eigenvalues().maxCoeff() < s_bound, "model.sigma: eigenvalues must be < model.s_bound");
    }
    if (kind == ExperimentKind::Lan) {
      const Matrix hm = parse_matrix(h, dd);
      require(hm.rows() == dd, "lan.h: dimension differs from model.sigma");
    }
    if (kind == ExperimentKind::EquivalenceTrend) Spectrum::parse(spectrum2);
    (void)spec;
  }
};

/// Loads an INI file on top of the defaults.
inline void load_ini(ExperimentConfig& cfg, const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError("config: " + std::string(e.what()));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ValidationError("config: key '" + section + "' outside a section");
    for (const auto& [key, val] : body) cfg.set(section + "." + key, val.get_value<std::string>());
  }
}

/// Documented defaults, one line per key.
inline std::string defaults_help() {
  std::string out = "Config keys (INI sections) and defaults:\n";
  const ExperimentConfig def;
  for (const auto& [k, v] : def.echo()) out += "  " + k + " = " + v + "\n";
  out += "  mc.threads = 1\n  mc.force = false\n  output.out = (stdout)\n  output.format = json\n";
  return out;
}

}  // namespace covest::bench
