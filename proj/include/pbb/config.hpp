#ifndef PBB_CONFIG_HPP
#define PBB_CONFIG_HPP

// Run configuration in an INI-like text format:
//
//   # comment
//   [model]
//   g = 50
//
// Section headers are optional because every key name is unique; a key
// outside its own section is an error. Rates are in units of kappa.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbb/mcwf.hpp"
#include "pbb/scaling.hpp"

namespace pbb {

class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

struct StudyConfig {
  std::vector<double> g_values{20.0, 30.0, 40.0, 50.0};
  std::vector<double> eta_over_g{0.18, 0.21, 0.24, 0.27, 0.30};
  PointBudget budget;
  double target_filling = 0.5;
  TimescaleSource timescale = TimescaleSource::dwell;
  bool exclude_largest_g = false;
  // phase diagram
  std::vector<double> delta_grid{-10.0, -8.0, -6.0, -5.0, -4.0, -3.0, -2.0, -1.0, -0.5, -0.2};
  double eta_over_g_step = 0.0025;

  bool operator==(const StudyConfig&) const = default;
};

struct RunConfig {
  ModelParams model{1.0, 0.0, 50.0, -5.0, 12.5, 0};  // cutoff 0: automatic
  TrajectoryConfig trajectory;
  StudyConfig study;
  int workers = 1;
  std::string out = "out";
  std::uint64_t master_seed = 1;

  /// Model with the automatic cutoff resolved.
  ModelParams resolved_model() const {
    ModelParams p = model;
    if (p.cutoff == 0)
      p.cutoff = p.g > 0.0 && p.delta != 0.0
                     ? recommended_cutoff(bright_photon_estimate(p.g, p.delta))
                     : recommended_cutoff(p.eta * p.eta / (1.0 + p.delta * p.delta));
    return p;
  }

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, int line, const std::string& key) {
  double out = 0.0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto [p, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || p != last || v.empty())
    throw ConfigError("value of '" + key + "' is not a number: '" + v + "'", line);
  return out;
}

inline std::int64_t parse_int(const std::string& v, int line, const std::string& key) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError("value of '" + key + "' is not an integer: '" + v + "'", line);
  return out;
}

inline std::uint64_t parse_uint(const std::string& v, int line, const std::string& key) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError("value of '" + key + "' is not an unsigned integer: '" + v + "'", line);
  return out;
}

inline bool parse_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("value of '" + key + "' is not a boolean: '" + v + "'", line);
}

inline std::vector<double> parse_list(const std::string& v, int line, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), line, key));
  if (out.empty()) throw ConfigError("list '" + key + "' is empty", line);
  return out;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

// key -> section
inline const std::map<std::string, std::string>& key_sections() {
  static const std::map<std::string, std::string> m{
      {"kappa", "model"},          {"gamma", "model"},
      {"g", "model"},              {"delta", "model"},
      {"eta", "model"},            {"cutoff", "model"},
      {"seed", "trajectory"},      {"t_final", "trajectory"},
      {"dt_sample", "trajectory"}, {"dt_max", "trajectory"},
      {"norm_tolerance", "trajectory"}, {"burn_in", "trajectory"},
      {"integrator", "trajectory"}, {"rk_tolerance", "trajectory"},
      {"guard_levels", "trajectory"}, {"guard_threshold", "trajectory"},
      {"g_values", "study"},       {"eta_over_g", "study"},
      {"t_per_seed", "study"},     {"seeds", "study"},
      {"target_filling", "study"}, {"timescale", "study"},
      {"exclude_largest_g", "study"}, {"delta_grid", "study"},
      {"eta_over_g_step", "study"},
      {"workers", "run"},          {"out", "run"},
      {"master_seed", "run"}};
  return m;
}

}  // namespace detail

inline const std::vector<std::string>& required_config_keys() {
  static const std::vector<std::string> keys{"g", "delta", "eta", "gamma"};
  return keys;
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::map<std::string, int> seen;
  std::map<std::string, int> key_line;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (const auto h = s.find('#'); h != std::string::npos) s = s.substr(0, h);
    s = detail::trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header", line);
      section = detail::trim(s.substr(1, s.size() - 2));
      if (section != "model" && section != "trajectory" && section != "study" && section != "run")
        throw ConfigError("unknown section '" + section + "'", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line);
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string val = detail::trim(s.substr(eq + 1));
    const auto& ks = detail::key_sections();
    const auto it = ks.find(key);
    if (it == ks.end()) throw ConfigError("unknown key '" + key + "'", line);
    if (!section.empty() && it->second != section)
      throw ConfigError("key '" + key + "' belongs to section [" + it->second + "]", line);
    if (seen.count(key))
      throw ConfigError("duplicate key '" + key + "' (first set on line " +
                            std::to_string(seen[key]) + ")",
                        line);
    seen[key] = line;

    using namespace detail;
    auto positive = [&](double v) {
      if (!(v > 0.0)) throw ConfigError("'" + key + "' must be positive", line);
      return v;
    };
    auto nonneg = [&](double v) {
      if (!(v >= 0.0)) throw ConfigError("'" + key + "' must be non-negative", line);
      return v;
    };
    if (key == "kappa") {
      if (parse_double(val, line, key) != 1.0)
        throw ConfigError("kappa is the unit of rates and must be 1", line);
    } else if (key == "gamma") {
      c.model.gamma = nonneg(parse_double(val, line, key));
    } else if (key == "g") {
      c.model.g = nonneg(parse_double(val, line, key));
    } else if (key == "delta") {
      c.model.delta = parse_double(val, line, key);
    } else if (key == "eta") {
      c.model.eta = nonneg(parse_double(val, line, key));
    } else if (key == "cutoff") {
      const auto v = parse_int(val, line, key);
      if (v < 0 || v > 100000) throw ConfigError("cutoff must be 0 (automatic) or positive", line);
      c.model.cutoff = int(v);
    } else if (key == "seed") {
      c.trajectory.seed = parse_uint(val, line, key);
    } else if (key == "t_final") {
      c.trajectory.t_final = positive(parse_double(val, line, key));
    } else if (key == "dt_sample") {
      c.trajectory.dt_sample = positive(parse_double(val, line, key));
    } else if (key == "dt_max") {
      c.trajectory.dt_max = positive(parse_double(val, line, key));
    } else if (key == "norm_tolerance") {
      const double v = parse_double(val, line, key);
      if (!(v > 0.0 && v < 1.0)) throw ConfigError("norm_tolerance must be in (0,1)", line);
      c.trajectory.norm_tolerance = v;
    } else if (key == "burn_in") {
      c.trajectory.burn_in = nonneg(parse_double(val, line, key));
    } else if (key == "integrator") {
      if (val == "taylor")
        c.trajectory.integrator = Integrator::taylor;
      else if (val == "adaptive_rk")
        c.trajectory.integrator = Integrator::adaptive_rk;
      else
        throw ConfigError("integrator must be taylor or adaptive_rk", line);
    } else if (key == "rk_tolerance") {
      c.trajectory.rk_tolerance = positive(parse_double(val, line, key));
    } else if (key == "guard_levels") {
      const auto v = parse_int(val, line, key);
      if (v < 1) throw ConfigError("guard_levels must be at least 1", line);
      c.trajectory.guard_levels = int(v);
    } else if (key == "guard_threshold") {
      c.trajectory.guard_threshold = positive(parse_double(val, line, key));
    } else if (key == "g_values") {
      c.study.g_values = parse_list(val, line, key);
      for (double v : c.study.g_values) positive(v);
    } else if (key == "eta_over_g") {
      c.study.eta_over_g = parse_list(val, line, key);
      for (double v : c.study.eta_over_g) positive(v);
    } else if (key == "t_per_seed") {
      c.study.budget.t_per_seed = positive(parse_double(val, line, key));
    } else if (key == "seeds") {
      const auto v = parse_int(val, line, key);
      if (v < 1) throw ConfigError("seeds must be at least 1", line);
      c.study.budget.seeds = int(v);
    } else if (key == "target_filling") {
      const double v = parse_double(val, line, key);
      if (!(v > 0.0 && v < 1.0)) throw ConfigError("target_filling must be in (0,1)", line);
      c.study.target_filling = v;
    } else if (key == "timescale") {
      if (val == "dwell")
        c.study.timescale = TimescaleSource::dwell;
      else if (val == "autocorrelation")
        c.study.timescale = TimescaleSource::autocorrelation;
      else
        throw ConfigError("timescale must be dwell or autocorrelation", line);
    } else if (key == "exclude_largest_g") {
      c.study.exclude_largest_g = parse_bool(val, line, key);
    } else if (key == "delta_grid") {
      c.study.delta_grid = parse_list(val, line, key);
      for (double v : c.study.delta_grid)
        if (!(v < 0.0)) throw ConfigError("delta_grid entries must be negative", line);
    } else if (key == "eta_over_g_step") {
      c.study.eta_over_g_step = positive(parse_double(val, line, key));
    } else if (key == "workers") {
      const auto v = parse_int(val, line, key);
      if (v < 1 || v > 1024) throw ConfigError("workers must be in [1, 1024]", line);
      c.workers = int(v);
    } else if (key == "out") {
      if (val.empty()) throw ConfigError("out must not be empty", line);
      c.out = val;
    } else if (key == "master_seed") {
      c.master_seed = parse_uint(val, line, key);
    }
  }
  for (const auto& k : required_config_keys())
    if (!seen.count(k)) throw ConfigError("missing required key '" + k + "'");
  if (c.trajectory.dt_max > c.trajectory.dt_sample && !seen.count("dt_max"))
    c.trajectory.dt_max = c.trajectory.dt_sample;
  try {
    c.trajectory.validate();
  } catch (const ModelError& e) {
    const char* keys[] = {"dt_sample", "dt_max", "burn_in", "t_final"};
    int l = 0;
    for (const char* k : keys)
      if (seen.count(k)) l = std::max(l, seen[k]);
    throw ConfigError(e.what(), l);
  }
  return c;
}

/// Canonical text; parse_config(write_config(c)) == c.
inline std::string write_config(const RunConfig& c) {
  using detail::fmt;
  std::ostringstream o;
  o << "[model]\n"
    << "kappa = 1\n"
    << "gamma = " << fmt(c.model.gamma) << "\n"
    << "g = " << fmt(c.model.g) << "\n"
    << "delta = " << fmt(c.model.delta) << "\n"
    << "eta = " << fmt(c.model.eta) << "\n"
    << "cutoff = " << c.model.cutoff << "\n"
    << "\n[trajectory]\n"
    << "seed = " << c.trajectory.seed << "\n"
    << "t_final = " << fmt(c.trajectory.t_final) << "\n"
    << "dt_sample = " << fmt(c.trajectory.dt_sample) << "\n"
    << "dt_max = " << fmt(c.trajectory.dt_max) << "\n"
    << "norm_tolerance = " << fmt(c.trajectory.norm_tolerance) << "\n"
    << "burn_in = " << fmt(c.trajectory.burn_in) << "\n"
    << "integrator = " << to_string(c.trajectory.integrator) << "\n"
    << "rk_tolerance = " << fmt(c.trajectory.rk_tolerance) << "\n"
    << "guard_levels = " << c.trajectory.guard_levels << "\n"
    << "guard_threshold = " << fmt(c.trajectory.guard_threshold) << "\n"
    << "\n[study]\n"
    << "g_values = " << detail::fmt_list(c.study.g_values) << "\n"
    << "eta_over_g = " << detail::fmt_list(c.study.eta_over_g) << "\n"
    << "t_per_seed = " << fmt(c.study.budget.t_per_seed) << "\n"
    << "seeds = " << c.study.budget.seeds << "\n"
    << "target_filling = " << fmt(c.study.target_filling) << "\n"
    << "timescale = " << to_string(c.study.timescale) << "\n"
    << "exclude_largest_g = " << (c.study.exclude_largest_g ? "true" : "false") << "\n"
    << "delta_grid = " << detail::fmt_list(c.study.delta_grid) << "\n"
    << "eta_over_g_step = " << fmt(c.study.eta_over_g_step) << "\n"
    << "\n[run]\n"
    << "workers = " << c.workers << "\n"
    << "out = " << c.out << "\n"
    << "master_seed = " << c.master_seed << "\n";
  return o.str();
}

/// FNV-1a of the canonical text, as 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(write_config(c))));
  return buf;
}

}  // namespace pbb

#endif  // PBB_CONFIG_HPP
