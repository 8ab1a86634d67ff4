#ifndef PBB_STUDY_HPP
#define PBB_STUDY_HPP

// The finite-size-scaling study as a resumable pipeline over persisted points:
//
//   <dir>/points/<spec hash>.json   one SweepPoint per file
//   <dir>/sweep.csv, orbit.csv, scaling.csv, exponents.json
//
// A point file is reused only if its stored spec matches exactly.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pbb/config.hpp"
#include "pbb/farm.hpp"
#include "pbb/io.hpp"
#include "pbb/scaling.hpp"

namespace pbb {

using Logger = std::function<void(const std::string&)>;

inline json spec_json(const PointSpec& s) {
  return {{"key", s.key()},
          {"budget", {{"t_per_seed", s.budget.t_per_seed}, {"seeds", s.budget.seeds}}},
          {"master_seed", s.master_seed},
          {"cutoff", s.params().cutoff},
          {"trajectory", to_json(s.base)}};
}

inline std::string point_file(const std::string& dir, const PointSpec& s) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx.json",
                static_cast<unsigned long long>(fnv1a(spec_json(s).dump())));
  return (std::filesystem::path(dir) / "points" / buf).string();
}

inline std::optional<SweepPoint> load_point(const std::string& dir, const PointSpec& s) {
  const std::string path = point_file(dir, s);
  if (!std::filesystem::exists(path)) return std::nullopt;
  const json j = json::parse(read_text_file(path));
  if (j.at("spec") != spec_json(s)) return std::nullopt;
  return point_from_json(j.at("point"));
}

inline void save_point(const std::string& dir, const PointSpec& s, const SweepPoint& p) {
  std::filesystem::create_directories(std::filesystem::path(dir) / "points");
  const json j = {{"spec", spec_json(s)}, {"point", to_json(p)}};
  const std::string path = point_file(dir, s);
  const std::string tmp = path + ".tmp";
  write_text_file(tmp, j.dump(1) + "\n");
  std::filesystem::rename(tmp, path);
}

struct PointRun {
  std::vector<PointSpec> specs;
  std::vector<std::optional<SweepPoint>> points;  // aligned with specs
  std::vector<FarmFailure> failures;
};

/// Simulates the specs that have no stored result (all of them unless
/// resume), persisting each point as soon as it completes.
inline PointRun run_points(const std::vector<PointSpec>& specs, const std::string& dir, int workers,
                           bool resume, const Logger& log = {}) {
  PointRun out;
  out.specs = specs;
  out.points.resize(specs.size());
  struct Job {
    std::size_t index;
    PointSpec spec;
    std::string key() const { return spec.key(); }
  };
  std::vector<Job> todo;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (resume) {
      if (auto p = load_point(dir, specs[i])) {
        out.points[i] = std::move(*p);
        continue;
      }
    }
    todo.push_back({i, specs[i]});
  }
  if (log && !todo.empty())
    log(std::to_string(todo.size()) + " point(s) to simulate, " +
        std::to_string(specs.size() - todo.size()) + " reused");
  std::size_t finished = 0;
  const std::size_t total = todo.size();
  auto outcome = farm<SweepPoint>(
      std::move(todo), workers, [](const Job& j) { return simulate_point(j.spec); },
      [&](const Job& j, const SweepPoint& p) {
        save_point(dir, j.spec, p);
        ++finished;
        if (log) {
          char buf[200];
          std::snprintf(buf, sizeof buf, "[%zu/%zu] %s F=%.3f tau=%.4g", finished, total,
                        j.spec.key().c_str(), p.stats.filling, p.stats.tau);
          log(buf);
        }
      });
  for (std::size_t k = 0; k < outcome.jobs.size(); ++k)
    if (outcome.results[k]) out.points[outcome.jobs[k].index] = std::move(*outcome.results[k]);
  out.failures = std::move(outcome.failures);
  return out;
}

inline PointSpec base_spec(const RunConfig& c) {
  PointSpec s;
  s.delta = c.model.delta;
  s.gamma = c.model.gamma;
  s.budget = c.study.budget;
  s.master_seed = c.master_seed;
  s.base = c.trajectory;
  s.cutoff = c.model.cutoff;
  return s;
}

/// The [model] point with the study budget.
inline PointSpec workpoint_spec(const RunConfig& c) {
  PointSpec s = base_spec(c);
  s.g = c.model.g;
  s.eta = c.model.eta;
  return s;
}

inline std::vector<PointSpec> sweep_specs(const RunConfig& c) {
  std::vector<PointSpec> out;
  for (double g : c.study.g_values)
    for (double r : c.study.eta_over_g) {
      PointSpec s = base_spec(c);
      s.g = g;
      s.eta = r * g;
      out.push_back(s);
    }
  return out;
}

struct StudyResult {
  std::vector<SweepPoint> sweep;
  std::map<double, EtaStar> eta_star;  // by g
  std::map<double, TauStar> tau_star;
  std::map<double, SweepPoint> orbit;
  std::vector<LambdaPoint> lambdas;
  std::optional<ExponentFit> tau_exponent, lambda_exponent, eta_star_exponent;
  std::vector<std::string> notes;
  std::vector<FarmFailure> failures;

  std::vector<SweepPoint> sweep_at(double g) const {
    std::vector<SweepPoint> out;
    for (const auto& p : sweep)
      if (p.g == g) out.push_back(p);
    return out;
  }
};

namespace detail {

inline std::vector<SweepPoint> guarded(const std::vector<SweepPoint>& in) {
  std::vector<SweepPoint> out;
  for (const auto& p : in)
    if (p.passes_truncation_guard()) out.push_back(p);
  return out;
}

}  // namespace detail

/// Supplies the points of a list of specs, simulated or loaded.
using PointSource = std::function<PointRun(const std::vector<PointSpec>&)>;

/// Sweep, eta*, orbit points at eta*, timescale at eta* and the exponent fits.
inline StudyResult study_from(const RunConfig& c, const PointSource& source) {
  StudyResult r;
  const auto specs = sweep_specs(c);
  PointRun sweep = source(specs);
  r.failures = sweep.failures;
  for (auto& p : sweep.points)
    if (p) r.sweep.push_back(*p);

  std::vector<double> gs = c.study.g_values;
  std::sort(gs.begin(), gs.end());
  std::vector<PointSpec> orbit_specs;
  for (double g : gs) {
    try {
      const EtaStar e = find_eta_star(r.sweep_at(g), c.study.target_filling);
      r.eta_star[g] = e;
      PointSpec s = base_spec(c);
      s.g = g;
      s.eta = e.eta_star;
      orbit_specs.push_back(s);
    } catch (const std::exception& ex) {
      r.notes.push_back("g=" + detail::fmt(g) + ": eta* unavailable: " + ex.what());
    }
  }
  PointRun orbit = source(orbit_specs);
  r.failures.insert(r.failures.end(), orbit.failures.begin(), orbit.failures.end());
  for (std::size_t i = 0; i < orbit_specs.size(); ++i)
    if (orbit.points[i]) r.orbit[orbit_specs[i].g] = *orbit.points[i];

  for (const auto& [g, e] : r.eta_star) {
    try {
      r.tau_star[g] = timescale_at_eta_star(e, detail::guarded(r.sweep_at(g)), c.study.timescale);
    } catch (const std::exception& ex) {
      r.notes.push_back("g=" + detail::fmt(g) + ": tau* unavailable: " + ex.what());
    }
  }

  const double g_max = gs.empty() ? 0.0 : gs.back();
  auto fit_included = [&](double g) { return !(c.study.exclude_largest_g && g == g_max); };
  {
    std::vector<double> x, y, s;
    for (const auto& [g, t] : r.tau_star)
      if (fit_included(g)) {
        x.push_back(g);
        y.push_back(t.tau);
        s.push_back(t.tau_err);
      }
    try {
      r.tau_exponent = fit_power_law(x, y, s);
    } catch (const std::exception& ex) {
      r.notes.push_back(std::string("tau exponent unavailable: ") + ex.what());
    }
  }
  {
    std::vector<double> x, y, s;
    for (const auto& [g, e] : r.eta_star)
      if (fit_included(g)) {
        x.push_back(g);
        y.push_back(e.eta_star);
        s.push_back(e.eta_star_err);
      }
    try {
      r.eta_star_exponent = fit_power_law(x, y, s);
    } catch (const std::exception& ex) {
      r.notes.push_back(std::string("eta* exponent unavailable: ") + ex.what());
    }
  }
  {
    std::vector<std::vector<SweepPoint>> groups;
    for (double g : gs)
      if (fit_included(g)) groups.push_back(r.sweep_at(g));
    try {
      r.lambdas = lambda_vs_g(groups);
      std::vector<double> x, y, s;
      for (const auto& l : r.lambdas) {
        x.push_back(l.g);
        y.push_back(l.lambda_mean);
        s.push_back(l.lambda_err);
      }
      r.lambda_exponent = fit_power_law(x, y, s);
    } catch (const std::exception& ex) {
      r.notes.push_back(std::string("lambda exponent unavailable: ") + ex.what());
    }
  }
  if (c.study.exclude_largest_g) r.notes.push_back("largest g excluded from exponent fits");
  return r;
}

inline StudyResult run_study(const RunConfig& c, const std::string& dir, int workers, bool resume,
                             const Logger& log = {}) {
  return study_from(c, [&](const std::vector<PointSpec>& specs) {
    return run_points(specs, dir, workers, resume, log);
  });
}

/// The study rebuilt from stored points only; missing points are failures.
inline StudyResult load_study(const RunConfig& c, const std::string& dir) {
  return study_from(c, [&](const std::vector<PointSpec>& specs) {
    PointRun out;
    out.specs = specs;
    for (const auto& s : specs) {
      out.points.push_back(load_point(dir, s));
      if (!out.points.back()) out.failures.push_back({s.key(), "no stored result"});
    }
    return out;
  });
}

inline std::string sweep_csv(const std::vector<SweepPoint>& pts, const std::string& hash) {
  std::ostringstream o;
  detail::comment_block(o, "pbb sweep points", hash);
  o << "g,eta,eta_over_g,gamma,cutoff,F,F_err,mu,mu_err,lambda,lambda_err,tau,tau_err,"
       "tau_autocorr,tau_autocorr_err,on_level,on_level_err,dim_q,dim_q_err,on_q,on_phase,"
       "n_on,n_off,longest_dwell,total_time,degenerate\n";
  std::string line;
  auto num = [&](double v) {
    detail::put_number(line, v);
    line += ',';
  };
  for (const auto& p : pts) {
    line.clear();
    num(p.g);
    num(p.eta);
    num(p.eta / p.g);
    num(p.gamma);
    line += std::to_string(p.cutoff) + ',';
    const auto& s = p.stats;
    for (double v : {s.filling, s.filling_err, s.mu, s.mu_err, s.lambda, s.lambda_err, s.tau,
                     s.tau_err, s.tau_autocorr, s.tau_autocorr_err, s.on_level, s.on_level_err,
                     p.dim_q, p.dim_q_err, p.on_q, p.on_phase})
      num(v);
    line += std::to_string(s.n_on) + ',' + std::to_string(s.n_off) + ',';
    num(s.longest_dwell);
    num(s.total_time);
    line += p.degenerate ? "1\n" : "0\n";
    o << line;
  }
  return o.str();
}

inline std::string scaling_csv(const StudyResult& r, const std::string& hash) {
  std::ostringstream o;
  detail::comment_block(o, "pbb scaling orbit", hash);
  o << "g,eta_star,eta_star_err,tau_star,tau_star_err,lambda_mean,lambda_err,orbit_F,orbit_F_err,"
       "orbit_tau,orbit_tau_err\n";
  std::map<double, LambdaPoint> lam;
  for (const auto& l : r.lambdas) lam[l.g] = l;
  std::vector<double> gs;
  for (const auto& [g, e] : r.eta_star) gs.push_back(g);
  for (const auto& l : r.lambdas)
    if (!r.eta_star.count(l.g)) gs.push_back(l.g);
  std::sort(gs.begin(), gs.end());
  for (double g : gs) {
    std::string line;
    auto num = [&](double v, bool last = false) {
      detail::put_number(line, v);
      line += last ? '\n' : ',';
    };
    const double nan = nan_value;
    num(g);
    num(r.eta_star.count(g) ? r.eta_star.at(g).eta_star : nan);
    num(r.eta_star.count(g) ? r.eta_star.at(g).eta_star_err : nan);
    num(r.tau_star.count(g) ? r.tau_star.at(g).tau : nan);
    num(r.tau_star.count(g) ? r.tau_star.at(g).tau_err : nan);
    num(lam.count(g) ? lam.at(g).lambda_mean : nan);
    num(lam.count(g) ? lam.at(g).lambda_err : nan);
    num(r.orbit.count(g) ? r.orbit.at(g).stats.filling : nan);
    num(r.orbit.count(g) ? r.orbit.at(g).stats.filling_err : nan);
    num(r.orbit.count(g) ? r.orbit.at(g).stats.tau : nan);
    num(r.orbit.count(g) ? r.orbit.at(g).stats.tau_err : nan, true);
    o << line;
  }
  return o.str();
}

inline json exponent_report(const StudyResult& r, const RunConfig& c) {
  json j = {{"config_hash", config_hash(c)},
            {"timescale_source", to_string(c.study.timescale)},
            {"target_filling", c.study.target_filling},
            {"exclude_largest_g", c.study.exclude_largest_g}};
  j["tau_exponent"] = r.tau_exponent ? to_json(*r.tau_exponent) : json(nullptr);
  j["lambda_exponent"] = r.lambda_exponent ? to_json(*r.lambda_exponent) : json(nullptr);
  j["eta_star_exponent"] = r.eta_star_exponent ? to_json(*r.eta_star_exponent) : json(nullptr);
  j["notes"] = r.notes;
  json fails = json::array();
  for (const auto& f : r.failures) fails.push_back({{"key", f.key}, {"error", f.what}});
  j["failures"] = fails;
  return j;
}

/// Grids, budgets and the derived seed of every point, written before any
/// simulation starts.
inline json study_manifest(const RunConfig& c, const std::vector<PointSpec>& specs) {
  json pts = json::array();
  for (const auto& s : specs)
    pts.push_back({{"key", s.key()},
                   {"g", s.g},
                   {"eta", s.eta},
                   {"gamma", s.gamma},
                   {"delta", s.delta},
                   {"cutoff", s.params().cutoff},
                   {"point_seed", point_seed(s.master_seed, s.key())}});
  return {{"format", "pbb-manifest-1"},
          {"config_hash", config_hash(c)},
          {"master_seed", c.master_seed},
          {"g_values", c.study.g_values},
          {"eta_over_g", c.study.eta_over_g},
          {"budget", {{"t_per_seed", c.study.budget.t_per_seed}, {"seeds", c.study.budget.seeds}}},
          {"burn_in", c.trajectory.burn_in},
          {"points", pts}};
}

inline void write_study_outputs(const StudyResult& r, const RunConfig& c, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string hash = config_hash(c);
  const auto p = std::filesystem::path(dir);
  write_text_file((p / "sweep.csv").string(), sweep_csv(r.sweep, hash));
  std::vector<SweepPoint> orbit;
  for (const auto& [g, pt] : r.orbit) orbit.push_back(pt);
  write_text_file((p / "orbit.csv").string(), sweep_csv(orbit, hash));
  write_text_file((p / "scaling.csv").string(), scaling_csv(r, hash));
  write_text_file((p / "exponents.json").string(), exponent_report(r, c).dump(2) + "\n");
}

}  // namespace pbb

#endif  // PBB_STUDY_HPP
