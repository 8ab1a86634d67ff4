#ifndef PBB_SCALING_HPP
#define PBB_SCALING_HPP

// Finite-size-scaling pipeline: eta sweeps at fixed g, eta* at the target
// filling, the timescale along the orbit (g, eta*(g)) and log-log fits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbb/mcwf.hpp"
#include "pbb/neoclassical.hpp"
#include "pbb/rng.hpp"
#include "pbb/telegraph.hpp"

namespace pbb {

class ScalingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ExponentFit {
  double exponent = nan_value;
  double exponent_err = nan_value;
  double intercept = nan_value;  // log-space
  double intercept_err = nan_value;
  double covariance = nan_value;  // of (exponent, intercept)
  double chi2 = nan_value;
  std::size_t dof = 0;
  std::vector<double> residuals;  // log y - fit
};

/// Weighted least squares of log y on log x; sigma are absolute errors of y
/// (empty for an unweighted fit). When chi2/dof exceeds one the parameter
/// errors are inflated by sqrt(chi2/dof).
inline ExponentFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y,
                                 const std::vector<double>& sigma = {}) {
  if (x.size() != y.size() || (!sigma.empty() && sigma.size() != y.size()))
    throw ScalingError("power-law fit inputs differ in length");
  if (x.size() < 3) throw ScalingError("power-law fit needs at least three points");
  std::vector<double> lx, ly, w;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ScalingError("power-law fit needs positive data");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
    if (sigma.empty()) {
      w.push_back(1.0);
    } else {
      const double rel = sigma[i] / y[i];
      if (!(rel > 0.0)) throw ScalingError("power-law fit needs positive errors");
      w.push_back(1.0 / (rel * rel));
    }
  }
  const auto f = weighted_line_fit(lx, ly, w);
  ExponentFit out;
  out.exponent = f.slope;
  out.intercept = f.intercept;
  out.chi2 = f.chi2;
  out.dof = x.size() - 2;
  double inflate = 1.0;
  if (sigma.empty()) {
    inflate = std::sqrt(f.chi2 / double(out.dof));  // unit weights: scale by residual variance
  } else if (f.chi2 > double(out.dof)) {
    inflate = std::sqrt(f.chi2 / double(out.dof));
  }
  out.exponent_err = std::sqrt(f.var_slope) * inflate;
  out.intercept_err = std::sqrt(f.var_intercept) * inflate;
  out.covariance = f.cov * inflate * inflate;
  for (std::size_t i = 0; i < lx.size(); ++i)
    out.residuals.push_back(ly[i] - f.intercept - f.slope * lx[i]);
  return out;
}

struct PointBudget {
  double t_per_seed = 15000.0;  // after burn-in
  int seeds = 4;

  double total_time() const { return t_per_seed * seeds; }
  bool operator==(const PointBudget&) const = default;
};

/// One (g, eta, gamma) point of a study.
struct SweepPoint {
  double g = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  int cutoff = 0;
  PointBudget budget;
  std::uint64_t point_seed = 0;
  TelegraphStats stats;
  double threshold = nan_value;
  double mean_photons = nan_value;
  double mean_excitation = nan_value;
  double dim_q = nan_value, dim_q_err = nan_value;
  double on_q = nan_value, on_q_err = nan_value;
  double on_phase = nan_value;
  double ks_on_p = nan_value, ks_off_p = nan_value;
  std::size_t jumps = 0;
  std::vector<double> on_durations, off_durations;
  bool degenerate = false;
  std::string note;

  /// Truncation-bias guard for exponent fits.
  bool passes_truncation_guard() const {
    return stats.longest_dwell < 0.1 * stats.total_time;
  }
  bool usable() const { return !degenerate && stats.rates_defined(); }
};

/// Minimal ON/OFF contrast for a pooled signal to count as a telegraph.
inline constexpr double min_telegraph_contrast = 20.0;

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Canonical key of a point; seeds derive from it, never from job order.
inline std::string point_key(double g, double eta, double gamma, double delta) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "g=%.17g,eta=%.17g,gamma=%.17g,delta=%.17g", g, eta, gamma, delta);
  return buf;
}

inline std::uint64_t point_seed(std::uint64_t master, const std::string& key) {
  return stream_seed(master, fnv1a(key));
}

struct PointSpec {
  double g = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  double delta = -5.0;
  PointBudget budget;
  std::uint64_t master_seed = 1;
  TrajectoryConfig base;  // seed, t_final and burn_in are overwritten
  int cutoff = 0;         // 0: recommended_cutoff of the bright estimate

  std::string key() const { return point_key(g, eta, gamma, delta); }
  ModelParams params() const {
    ModelParams p;
    p.g = g;
    p.eta = eta;
    p.gamma = gamma;
    p.delta = delta;
    p.cutoff = cutoff > 0 ? cutoff : recommended_cutoff(bright_photon_estimate(g, delta));
    return p;
  }
};

/// Pooled analysis of the records of one point. The threshold is half the
/// pooled post-burn-in mean so that a seed which never blinks on is not
/// binarized at its own dim-state noise level.
inline SweepPoint analyze_point(const PointSpec& spec, const std::vector<TrajectoryRecord>& recs,
                                const BinarizeOptions& opt = {}) {
  SweepPoint pt;
  pt.g = spec.g;
  pt.eta = spec.eta;
  pt.gamma = spec.gamma;
  pt.delta = spec.delta;
  pt.cutoff = recs.empty() ? 0 : recs.front().params.cutoff;
  pt.budget = spec.budget;
  pt.point_seed = point_seed(spec.master_seed, spec.key());
  double sum_n = 0.0, sum_e = 0.0, count = 0.0;
  for (const auto& r : recs) {
    const std::size_t i0 = detail::first_sample_at(r, r.config.burn_in);
    for (std::size_t i = i0; i < r.size(); ++i) {
      sum_n += r.photon_number[i];
      sum_e += r.atom_excitation.empty() ? 0.0 : r.atom_excitation[i];
    }
    count += double(r.size() - i0);
    pt.jumps += r.jumps.size();
  }
  pt.mean_photons = sum_n / count;
  pt.mean_excitation = sum_e / count;
  pt.threshold = 0.5 * pt.mean_photons;

  std::vector<BinarySignal> xs;
  for (const auto& r : recs) {
    BinarySignal x = pt.mean_photons > opt.dark_floor
                         ? binarize_at(r, pt.threshold, opt)
                         : binarize(r, opt);
    xs.push_back(std::move(x));
  }
  std::vector<const TrajectoryRecord*> rp;
  std::vector<const BinarySignal*> xp;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    rp.push_back(&recs[i]);
    xp.push_back(&xs[i]);
  }
  pt.stats = telegraph_stats(rp, xp);
  add_autocorrelation(pt.stats, xp);
  for (const auto& x : xs) {
    const DwellTimes d = dwell_times(x);
    pt.on_durations.insert(pt.on_durations.end(), d.on.begin(), d.on.end());
    pt.off_durations.insert(pt.off_durations.end(), d.off.begin(), d.off.end());
  }

  if (pt.stats.degenerate) {
    pt.degenerate = true;
    pt.note = "all-dark record";
  } else if (!pt.stats.rates_defined()) {
    pt.degenerate = true;
    pt.note = "fewer than two complete ON or OFF periods";
  } else if (!(pt.stats.on_level > min_telegraph_contrast * pt.stats.off_level)) {
    pt.degenerate = true;
    pt.note = "no ON/OFF contrast";
  }
  if (pt.stats.filling > 0.0 && pt.stats.filling < 1.0) {
    try {
      const auto q = dim_period_mandel_q(rp, xp);
      pt.dim_q = q.first;
      pt.dim_q_err = q.second;
    } catch (const TelegraphError&) {
    }
    try {
      const auto q = period_mandel_q(rp, xp, 1);
      pt.on_q = q.first;
      pt.on_q_err = q.second;
    } catch (const TelegraphError&) {
    }
    try {
      pt.on_phase = on_period_phase(rp, xp);
    } catch (const TelegraphError&) {
    }
  }
  if (pt.on_durations.size() >= 50) pt.ks_on_p = dwell_distribution_test(pt.on_durations).p_value;
  if (pt.off_durations.size() >= 50) pt.ks_off_p = dwell_distribution_test(pt.off_durations).p_value;
  return pt;
}

inline TrajectoryConfig seed_config(const PointSpec& spec, int s) {
  TrajectoryConfig c = spec.base;
  c.seed = stream_seed(point_seed(spec.master_seed, spec.key()), std::uint64_t(s));
  c.t_final = c.burn_in + spec.budget.t_per_seed;
  return c;
}

/// Runs all seeds of a point sequentially and analyzes them together.
inline SweepPoint simulate_point(const PointSpec& spec) {
  if (spec.budget.seeds < 1 || !(spec.budget.t_per_seed > 0.0))
    throw ScalingError("point budget needs seeds >= 1 and t_per_seed > 0");
  const ModelParams p = spec.params();
  std::vector<TrajectoryRecord> recs;
  for (int s = 0; s < spec.budget.seeds; ++s) recs.push_back(run_trajectory(p, seed_config(spec, s)));
  return analyze_point(spec, recs);
}

/// Warns (returns false) when eta lies outside the neoclassical bistable window.
inline bool inside_bistable_window(double g, double eta, double delta) {
  std::vector<double> grid;
  for (int i = 1; i <= 200; ++i) grid.push_back(g * 0.005 * i);
  const BistabilityWindow w = bistability_boundaries(delta, g, grid);
  return w.eta_lower && w.eta_upper && eta >= *w.eta_lower && eta <= *w.eta_upper;
}

inline std::vector<SweepPoint> sweep_eta(double g, const std::vector<double>& eta_grid,
                                         const PointSpec& base) {
  std::vector<SweepPoint> out;
  for (double eta : eta_grid) {
    PointSpec s = base;
    s.g = g;
    s.eta = eta;
    SweepPoint pt = simulate_point(s);
    if (!inside_bistable_window(g, eta, s.delta))
      pt.note += pt.note.empty() ? "outside neoclassical window" : "; outside neoclassical window";
    out.push_back(std::move(pt));
  }
  return out;
}

struct EtaStar {
  double g = 0.0;
  double eta_star = nan_value;
  double eta_star_err = nan_value;
  double slope = nan_value, intercept = nan_value;  // F = intercept + slope eta
  double chi2 = nan_value;
  double f_min = nan_value, f_max = nan_value;  // F range used
  std::vector<double> etas_used;
  bool extrapolated = false;
};

namespace detail {

struct XYS {
  double x, y, s;
};

inline std::vector<XYS> filling_points(const std::vector<SweepPoint>& sweep) {
  std::vector<XYS> pts;
  for (const auto& p : sweep)
    if (p.usable() && p.stats.filling_err > 0.0) pts.push_back({p.eta, p.stats.filling, p.stats.filling_err});
  std::sort(pts.begin(), pts.end(), [](const XYS& a, const XYS& b) { return a.x < b.x; });
  return pts;
}

// two points on each side of the first crossing of target, or all points
inline std::vector<XYS> bracket_window(const std::vector<XYS>& pts, double target, bool* bracketed) {
  *bracketed = false;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i].y < target && pts[i + 1].y >= target) {
      *bracketed = true;
      const std::size_t lo = i >= 1 ? i - 1 : 0;
      const std::size_t hi = std::min(pts.size() - 1, i + 2);
      return {pts.begin() + std::ptrdiff_t(lo), pts.begin() + std::ptrdiff_t(hi) + 1};
    }
  }
  return pts;
}

}  // namespace detail

/// Weighted linear fit of F(eta) around the crossing of `target`. Without a
/// bracket the line may be extrapolated by at most 10% of the grid span.
inline EtaStar find_eta_star(const std::vector<SweepPoint>& sweep, double target = 0.5) {
  const auto pts = detail::filling_points(sweep);
  if (pts.size() < 2) throw ScalingError("eta* needs at least two usable sweep points");
  bool bracketed = false;
  const auto win = detail::bracket_window(pts, target, &bracketed);
  std::vector<double> x, y, w;
  EtaStar out;
  out.g = sweep.front().g;
  out.f_min = win.front().y;
  out.f_max = win.front().y;
  for (const auto& p : win) {
    x.push_back(p.x);
    y.push_back(p.y);
    w.push_back(1.0 / (p.s * p.s));
    out.etas_used.push_back(p.x);
    out.f_min = std::min(out.f_min, p.y);
    out.f_max = std::max(out.f_max, p.y);
  }
  const auto f = weighted_line_fit(x, y, w);
  if (!(f.slope > 0.0)) throw ScalingError("filling factor does not increase with eta");
  out.slope = f.slope;
  out.intercept = f.intercept;
  out.chi2 = f.chi2;
  out.eta_star = (target - f.intercept) / f.slope;
  const double e = out.eta_star;
  double var = (f.var_intercept + e * e * f.var_slope + 2.0 * e * f.cov) / (f.slope * f.slope);
  const std::size_t dof = x.size() > 2 ? x.size() - 2 : 0;
  if (dof > 0 && f.chi2 > double(dof)) var *= f.chi2 / double(dof);
  out.eta_star_err = std::sqrt(std::max(var, 0.0));
  out.extrapolated = !bracketed;
  if (!bracketed) {
    const double span = pts.back().x - pts.front().x;
    if (e < pts.front().x - 0.1 * span || e > pts.back().x + 0.1 * span)
      throw ScalingError("eta* not bracketed by the sweep and beyond the 10% extrapolation limit");
  }
  return out;
}

enum class TimescaleSource { dwell, autocorrelation };

inline const char* to_string(TimescaleSource s) {
  return s == TimescaleSource::dwell ? "dwell" : "autocorrelation";
}

struct TauStar {
  double g = 0.0;
  double eta_star = nan_value;
  double tau = nan_value;
  double tau_err = nan_value;
};

inline std::pair<double, double> timescale_of(const SweepPoint& p, TimescaleSource src) {
  return src == TimescaleSource::dwell ? std::pair{p.stats.tau, p.stats.tau_err}
                                       : std::pair{p.stats.tau_autocorr, p.stats.tau_autocorr_err};
}

/// Linear interpolation of tau(eta) at eta* between the nearest window points
/// on either side. tau(eta) peaks near half filling, so a single line through
/// the whole window misses the peak. If eta* lies just outside the points,
/// the two nearest are extended. The error combines both point errors with
/// slope times the eta* uncertainty.
inline TauStar timescale_at_eta_star(const EtaStar& star, const std::vector<SweepPoint>& sweep,
                                     TimescaleSource src = TimescaleSource::dwell) {
  std::vector<detail::XYS> pts;
  for (const auto& p : sweep) {
    if (!p.usable()) continue;
    if (std::find(star.etas_used.begin(), star.etas_used.end(), p.eta) == star.etas_used.end())
      continue;
    const auto [t, te] = timescale_of(p, src);
    if (!(t > 0.0) || !(te > 0.0)) continue;
    pts.push_back({p.eta, t, te});
  }
  if (pts.size() < 2) throw ScalingError("tau* needs at least two usable points around eta*");
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  const double e = star.eta_star;
  const double span = pts.back().x - pts.front().x;
  if (e < pts.front().x - 0.1 * span || e > pts.back().x + 0.1 * span)
    throw ScalingError("eta* outside the range of the tau sweep");
  std::size_t hi = 1;
  while (hi + 1 < pts.size() && pts[hi].x < e) ++hi;
  const auto& a = pts[hi - 1];
  const auto& b = pts[hi];
  const double wb = (e - a.x) / (b.x - a.x), wa = 1.0 - wb;
  const double slope = (b.y - a.y) / (b.x - a.x);
  TauStar out{star.g, e, wa * a.y + wb * b.y, nan_value};
  out.tau_err = std::sqrt(wa * wa * a.s * a.s + wb * wb * b.s * b.s +
                          slope * slope * star.eta_star_err * star.eta_star_err);
  return out;
}

struct LambdaPoint {
  double g = 0.0;
  double lambda_mean = nan_value;
  double lambda_err = nan_value;
  double spread = nan_value;  // (max - min) / mean over eta
  std::size_t points = 0;
};

/// Filling range in which both phases are resolved. Near empty filling the
/// half-mean threshold sits inside the dim-state noise and the short ON
/// excursions it picks up are not blink-off events; near full filling the
/// same happens to the dim phase.
inline constexpr double lambda_min_filling = 0.1, lambda_max_filling = 0.9;

/// Arithmetic mean of lambda over the usable, guard-passing points of each g
/// whose filling lies in the resolved range.
inline std::vector<LambdaPoint> lambda_vs_g(const std::vector<std::vector<SweepPoint>>& sweeps) {
  std::vector<LambdaPoint> out;
  for (const auto& sweep : sweeps) {
    if (sweep.empty()) throw ScalingError("empty sweep group");
    LambdaPoint lp;
    lp.g = sweep.front().g;
    double sum = 0.0, var = 0.0, mn = INFINITY, mx = -INFINITY;
    for (const auto& p : sweep) {
      if (!p.usable() || !p.passes_truncation_guard()) continue;
      if (p.stats.filling < lambda_min_filling || p.stats.filling > lambda_max_filling) continue;
      sum += p.stats.lambda;
      var += p.stats.lambda_err * p.stats.lambda_err;
      mn = std::min(mn, p.stats.lambda);
      mx = std::max(mx, p.stats.lambda);
      ++lp.points;
    }
    if (lp.points < 2) throw ScalingError("lambda average needs at least two eta points");
    lp.lambda_mean = sum / double(lp.points);
    lp.lambda_err = std::sqrt(var) / double(lp.points);
    lp.spread = (mx - mn) / lp.lambda_mean;
    out.push_back(lp);
  }
  return out;
}

}  // namespace pbb

#endif  // PBB_SCALING_HPP
