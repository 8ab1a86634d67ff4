#ifndef PBB_TELEGRAPH_HPP
#define PBB_TELEGRAPH_HPP

// Telegraph-process analysis of a photon-number record: binarization at half
// the temporal mean, dwell statistics, autocorrelation timescale, per-phase
// averages and switch-event windows.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "pbb/mcwf.hpp"
#include "pbb/rng.hpp"

namespace pbb {

class TelegraphError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

struct BinarizeOptions {
  int min_run = 5;           // samples; shorter periods are merged into the preceding one
  double dark_floor = 1e-3;  // mean photon number below which a record has no telegraph
};

/// Binary image of a record on its sampling grid, restricted to t >= burn_in.
struct BinarySignal {
  std::vector<double> sample_times;
  std::vector<std::uint8_t> values;
  double threshold = 0.0;
  double dt = 0.0;
  std::size_t first_index = 0;  // index of sample_times[0] in the source record
  bool degenerate = false;

  std::size_t size() const { return values.size(); }
  double span() const { return dt * double(values.size()); }
};

struct Run {
  std::uint8_t value;
  std::size_t start;
  std::size_t length;
};

inline std::vector<Run> runs_of(const std::vector<std::uint8_t>& v) {
  std::vector<Run> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (out.empty() || out.back().value != v[i])
      out.push_back({v[i], i, 1});
    else
      ++out.back().length;
  }
  return out;
}

/// A change of state is accepted only when the new state persists for
/// min_run samples; shorter excursions are absorbed into the running period.
inline void merge_short_periods(std::vector<std::uint8_t>& v, int min_run) {
  if (min_run <= 1) return;
  std::vector<Run> merged;
  for (const Run& r : runs_of(v)) {
    if (!merged.empty() && (r.length < std::size_t(min_run) || merged.back().value == r.value))
      merged.back().length += r.length;
    else
      merged.push_back(r);
  }
  for (const Run& r : merged) std::fill_n(v.begin() + std::ptrdiff_t(r.start), r.length, r.value);
}

namespace detail {

inline std::size_t first_sample_at(const TrajectoryRecord& rec, double t) {
  const auto it = std::lower_bound(rec.sample_times.begin(), rec.sample_times.end(), t - 1e-9);
  return static_cast<std::size_t>(it - rec.sample_times.begin());
}

inline double window_mean_photons(const TrajectoryRecord& rec) {
  const std::size_t i0 = first_sample_at(rec, rec.config.burn_in);
  if (i0 >= rec.size()) throw TelegraphError("record does not extend past burn_in");
  double s = 0.0;
  for (std::size_t i = i0; i < rec.size(); ++i) s += rec.photon_number[i];
  return s / double(rec.size() - i0);
}

}  // namespace detail

/// X = 1 where n > threshold, on samples after burn_in.
inline BinarySignal binarize_at(const TrajectoryRecord& rec, double threshold,
                                const BinarizeOptions& opt = {}) {
  BinarySignal x;
  x.first_index = detail::first_sample_at(rec, rec.config.burn_in);
  if (x.first_index >= rec.size()) throw TelegraphError("record does not extend past burn_in");
  x.dt = rec.config.dt_sample;
  x.threshold = threshold;
  x.sample_times.assign(rec.sample_times.begin() + std::ptrdiff_t(x.first_index),
                        rec.sample_times.end());
  x.values.resize(x.sample_times.size());
  for (std::size_t i = 0; i < x.values.size(); ++i)
    x.values[i] = rec.photon_number[x.first_index + i] > threshold ? 1 : 0;
  merge_short_periods(x.values, opt.min_run);
  return x;
}

/// Threshold at half the temporal mean. An all-dark record gives the flagged
/// all-zero signal.
inline BinarySignal binarize(const TrajectoryRecord& rec, const BinarizeOptions& opt = {}) {
  const double mean = detail::window_mean_photons(rec);
  if (!(mean > opt.dark_floor)) {
    BinarySignal x = binarize_at(rec, std::numeric_limits<double>::infinity(), opt);
    x.threshold = 0.5 * mean;
    x.degenerate = true;
    return x;
  }
  return binarize_at(rec, 0.5 * mean, opt);
}

/// |var X - <X>(1 - <X>)|, two-pass with compensated summation.
inline double verify_binary_identity(const BinarySignal& x) {
  if (x.values.empty()) return 0.0;
  const double n = double(x.values.size());
  std::size_t ones = 0;
  for (auto v : x.values) {
    if (v > 1) throw TelegraphError("signal is not binary");
    ones += v;
  }
  const double mean = double(ones) / n;
  double ss = 0.0, c = 0.0;
  for (auto v : x.values) {
    const double term = (v - mean) * (v - mean);
    const double t = ss + term;
    c += std::abs(ss) >= term ? (ss - t) + term : (term - t) + ss;
    ss = t;
  }
  return std::abs((ss + c) / n - mean * (1.0 - mean));
}

struct DwellTimes {
  std::vector<double> on;
  std::vector<double> off;
};

/// Complete periods only: the first and last (censored) periods are dropped.
inline DwellTimes dwell_times(const BinarySignal& x, const std::vector<Run>& runs) {
  DwellTimes d;
  for (std::size_t k = 1; k + 1 < runs.size(); ++k)
    (runs[k].value ? d.on : d.off).push_back(x.dt * double(runs[k].length));
  return d;
}

inline DwellTimes dwell_times(const BinarySignal& x) { return dwell_times(x, runs_of(x.values)); }

inline double longest_dwell(const BinarySignal& x, const std::vector<Run>& runs) {
  std::size_t longest = 0;
  for (const Run& r : runs) longest = std::max(longest, r.length);
  return x.dt * double(longest);
}

inline double longest_dwell(const BinarySignal& x) { return longest_dwell(x, runs_of(x.values)); }

struct TelegraphStats {
  double on_level = nan_value, on_level_err = nan_value;
  double off_level = nan_value;
  double mu = nan_value, mu_err = nan_value;
  double lambda = nan_value, lambda_err = nan_value;
  double filling = nan_value, filling_err = nan_value;
  double tau = nan_value, tau_err = nan_value;
  double tau_autocorr = nan_value, tau_autocorr_err = nan_value;
  std::size_t n_on = 0, n_off = 0;
  double total_time = 0.0;
  double longest_dwell = 0.0;
  double identity_deviation = 0.0;
  bool degenerate = false;

  bool rates_defined() const { return n_on >= 2 && n_off >= 2; }
};

namespace detail {

// mean and standard error of per-period means, weighted by period length
inline std::pair<double, double> period_block_mean(const std::vector<double>& sums,
                                                   const std::vector<double>& counts) {
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    s += sums[i];
    c += counts[i];
  }
  if (c == 0.0) return {nan_value, nan_value};
  const double mean = s / c;
  if (sums.size() < 2) return {mean, nan_value};
  double v = 0.0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    const double d = sums[i] / counts[i] - mean;
    v += counts[i] * counts[i] * d * d;
  }
  const double k = double(sums.size());
  return {mean, std::sqrt(v * k / (k - 1.0)) / c};
}

template <class Value, class Defined>
std::pair<double, double> level_over(const std::vector<const TrajectoryRecord*>& recs,
                                     const std::vector<const BinarySignal*>& xs, std::uint8_t state,
                                     Value value, Defined defined, double* defined_fraction) {
  std::vector<double> sums, counts;
  std::size_t total = 0, used = 0;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const BinarySignal& x = *xs[r];
    for (const Run& run : runs_of(x.values)) {
      if (run.value != state) continue;
      double s = 0.0, c = 0.0;
      for (std::size_t i = run.start; i < run.start + run.length; ++i) {
        const std::size_t j = x.first_index + i;
        ++total;
        if (!defined(*recs[r], j)) continue;
        ++used;
        s += value(*recs[r], j);
        c += 1.0;
      }
      if (c > 0.0) {
        sums.push_back(s);
        counts.push_back(c);
      }
    }
  }
  if (defined_fraction) *defined_fraction = total ? double(used) / double(total) : 0.0;
  return period_block_mean(sums, counts);
}

}  // namespace detail

/// Mean photon number over ON samples, with a standard error from the spread
/// of per-period means.
inline std::pair<double, double> on_level(const std::vector<const TrajectoryRecord*>& recs,
                                          const std::vector<const BinarySignal*>& xs) {
  auto r = detail::level_over(
      recs, xs, 1, [](const TrajectoryRecord& t, std::size_t j) { return t.photon_number[j]; },
      [](const TrajectoryRecord&, std::size_t) { return true; }, nullptr);
  if (std::isnan(r.first)) throw TelegraphError("no ON samples");
  return r;
}

inline double on_level(const TrajectoryRecord& rec, const BinarySignal& x) {
  return on_level({&rec}, {&x}).first;
}

inline double off_level(const std::vector<const TrajectoryRecord*>& recs,
                        const std::vector<const BinarySignal*>& xs) {
  return detail::level_over(
             recs, xs, 0,
             [](const TrajectoryRecord& t, std::size_t j) { return t.photon_number[j]; },
             [](const TrajectoryRecord&, std::size_t) { return true; }, nullptr)
      .first;
}

/// Time average of the instantaneous Q over samples in `state`; samples
/// where Q is undefined are skipped, and at least half must be defined.
inline std::pair<double, double> period_mandel_q(const std::vector<const TrajectoryRecord*>& recs,
                                                 const std::vector<const BinarySignal*>& xs,
                                                 std::uint8_t state) {
  double frac = 0.0;
  auto r = detail::level_over(
      recs, xs, state, [](const TrajectoryRecord& t, std::size_t j) { return t.mandel_q[j]; },
      [](const TrajectoryRecord& t, std::size_t j) { return !std::isnan(t.mandel_q[j]); }, &frac);
  if (std::isnan(r.first) || frac < 0.5)
    throw TelegraphError("Mandel Q undefined on more than half of the period samples");
  return r;
}

inline std::pair<double, double> dim_period_mandel_q(
    const std::vector<const TrajectoryRecord*>& recs, const std::vector<const BinarySignal*>& xs) {
  return period_mandel_q(recs, xs, 0);
}

inline double dim_period_mandel_q(const TrajectoryRecord& rec, const BinarySignal& x) {
  return dim_period_mandel_q({&rec}, {&x}).first;
}

/// Circular mean of arg<a> over ON samples with a defined phase.
inline double on_period_phase(const std::vector<const TrajectoryRecord*>& recs,
                              const std::vector<const BinarySignal*>& xs) {
  cplx acc = 0.0;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const BinarySignal& x = *xs[r];
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!x.values[i]) continue;
      const cplx a = recs[r]->field_amplitude[x.first_index + i];
      if (std::norm(a) < q_floor) continue;
      acc += a / std::abs(a);
    }
  }
  if (acc == 0.0) throw TelegraphError("no ON samples with a defined phase");
  return std::arg(acc);
}

struct AutocorrelationFit {
  double tau = nan_value;
  double tau_err = nan_value;
  double c0 = 0.0;
  std::size_t lags_used = 0;
  std::vector<double> covariance;  // C(k dt), k = 0..max_lag
};

namespace detail {

// sum_i y_i y_{i+k} for k = 0..max_lag, zero-padded FFT
inline std::vector<double> lag_products(const std::vector<double>& y, std::size_t max_lag) {
  std::size_t n = 1;
  while (n < y.size() + max_lag + 1) n <<= 1;
  std::vector<double> padded(n, 0.0);
  std::copy(y.begin(), y.end(), padded.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& z : spec) z = std::norm(z);
  std::vector<double> back;
  fft.inv(back, spec);
  back.resize(std::min(max_lag + 1, y.size()));
  return back;
}

struct LineFit {
  double slope = 0.0, intercept = 0.0;
  double var_slope = 0.0, var_intercept = 0.0, cov = 0.0;
  double chi2 = 0.0;
};

}  // namespace detail

/// Weighted least squares y = intercept + slope x with weights w (1/sigma^2).
/// Parameter covariance is the inverse normal matrix.
inline detail::LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y,
                                         const std::vector<double>& w) {
  if (x.size() < 2 || x.size() != y.size() || x.size() != w.size())
    throw TelegraphError("line fit needs at least two matched points");
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) throw TelegraphError("degenerate line fit");
  detail::LineFit f;
  f.slope = (sw * sxy - sx * sy) / det;
  f.intercept = (sxx * sy - sx * sxy) / det;
  f.var_slope = sw / det;
  f.var_intercept = sxx / det;
  f.cov = -sx / det;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    f.chi2 += w[i] * r * r;
  }
  return f;
}

namespace detail {

struct LagSums {
  std::vector<double> sum;
  std::vector<double> count;
};

inline double fit_decay(const LagSums& s, double dt, std::size_t* used = nullptr,
                        std::vector<double>* cov_out = nullptr) {
  const std::size_t kmax = s.sum.size();
  std::vector<double> c(kmax);
  for (std::size_t k = 0; k < kmax; ++k) c[k] = s.count[k] > 0 ? s.sum[k] / s.count[k] : 0.0;
  if (cov_out) *cov_out = c;
  if (!(c[0] > 0.0)) throw TelegraphError("zero variance: autocorrelation undefined");
  std::vector<double> xs, ys, ws;
  std::size_t k = 0;
  for (; k < kmax && c[k] > 0.05 * c[0]; ++k) {
    xs.push_back(double(k) * dt);
    ys.push_back(std::log(c[k]));
    ws.push_back(c[k] * c[k] * s.count[k]);
  }
  if (k == kmax) throw TelegraphError("autocorrelation above 5% of C(0) up to max_lag");
  if (xs.size() < 3) throw TelegraphError("autocorrelation decays within two lags");
  if (used) *used = xs.size();
  const LineFit f = weighted_line_fit(xs, ys, ws);
  if (!(f.slope < 0.0)) throw TelegraphError("autocorrelation does not decay");
  return -1.0 / f.slope;
}

}  // namespace detail

/// Unbiased autocovariance pooled over signals and an exponential fit of its
/// decay. The error is a delete-one-block jackknife over contiguous blocks.
inline AutocorrelationFit autocorrelation_timescale(const std::vector<const BinarySignal*>& xs,
                                                    std::size_t max_lag, int blocks = 16) {
  if (xs.empty()) throw TelegraphError("no signals");
  const double dt = xs[0]->dt;
  double total = 0.0;
  for (const BinarySignal* x : xs) {
    if (x->dt != dt) throw TelegraphError("signals on different grids");
    total += double(x->size());
  }

  // per-block lag sums, pairs starting inside the block
  std::vector<detail::LagSums> parts;
  const std::size_t block_len =
      std::max<std::size_t>(std::size_t(total / std::max(blocks, 1)), 4 * max_lag + 1);
  for (const BinarySignal* x : xs) {
    // each record about its own mean; a pooled mean leaves a constant offset
    // in C when one seed never leaves a phase
    double ones = 0.0;
    for (auto v : x->values) ones += v;
    const double mean = x->size() ? ones / double(x->size()) : 0.0;
    std::vector<double> y(x->size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x->values[i] - mean;
    for (std::size_t b0 = 0; b0 < y.size(); b0 += block_len) {
      const std::size_t b1 = std::min(y.size(), b0 + block_len);
      const std::size_t e1 = std::min(y.size(), b1 + max_lag);
      std::vector<double> seg(y.begin() + std::ptrdiff_t(b0), y.begin() + std::ptrdiff_t(e1));
      // products with the first index in [b0,b1): correlate block with segment
      std::vector<double> head(seg.begin(), seg.begin() + std::ptrdiff_t(b1 - b0));
      detail::LagSums p;
      p.sum.assign(max_lag + 1, 0.0);
      p.count.assign(max_lag + 1, 0.0);
      std::vector<double> full = detail::lag_products(seg, max_lag);
      std::vector<double> tail(seg.begin() + std::ptrdiff_t(b1 - b0), seg.end());
      std::vector<double> tail_products = detail::lag_products(tail, max_lag);
      for (std::size_t k = 0; k <= max_lag; ++k) {
        const double f = k < full.size() ? full[k] : 0.0;
        const double t = k < tail_products.size() ? tail_products[k] : 0.0;
        p.sum[k] = f - t;
        const double starts = double(b1 - b0);
        const double valid = double(e1) - double(b0) - double(k);
        p.count[k] = std::clamp(valid, 0.0, starts);
      }
      parts.push_back(std::move(p));
    }
  }
  detail::LagSums all{std::vector<double>(max_lag + 1, 0.0), std::vector<double>(max_lag + 1, 0.0)};
  for (const auto& p : parts)
    for (std::size_t k = 0; k <= max_lag; ++k) {
      all.sum[k] += p.sum[k];
      all.count[k] += p.count[k];
    }

  AutocorrelationFit out;
  out.tau = detail::fit_decay(all, dt, &out.lags_used, &out.covariance);
  out.c0 = out.covariance[0];
  const std::size_t nb = parts.size();
  if (nb >= 2) {
    std::vector<double> reps;
    for (std::size_t j = 0; j < nb; ++j) {
      detail::LagSums loo = all;
      for (std::size_t k = 0; k <= max_lag; ++k) {
        loo.sum[k] -= parts[j].sum[k];
        loo.count[k] -= parts[j].count[k];
      }
      try {
        reps.push_back(detail::fit_decay(loo, dt));
      } catch (const TelegraphError&) {
        reps.clear();
        break;
      }
    }
    if (reps.size() == nb) {
      const double m = std::accumulate(reps.begin(), reps.end(), 0.0) / double(nb);
      double v = 0.0;
      for (double r : reps) v += (r - m) * (r - m);
      out.tau_err = std::sqrt(v * double(nb - 1) / double(nb));
    }
  }
  return out;
}

inline AutocorrelationFit autocorrelation_timescale(const BinarySignal& x, std::size_t max_lag) {
  return autocorrelation_timescale(std::vector<const BinarySignal*>{&x}, max_lag);
}

/// Table-1 statistics pooled over records of one parameter point. Rates are
/// exponential maximum-likelihood estimates from complete dwell periods; F
/// is the ON sample fraction with the telegraph-model error
/// sqrt(2 F (1-F) tau / T).
inline TelegraphStats telegraph_stats(const std::vector<const TrajectoryRecord*>& recs,
                                      const std::vector<const BinarySignal*>& xs) {
  if (recs.size() != xs.size() || recs.empty()) throw TelegraphError("records/signals mismatch");
  TelegraphStats s;
  double on_samples = 0.0, samples = 0.0, on_time = 0.0, off_time = 0.0;
  for (const BinarySignal* x : xs) {
    s.identity_deviation = std::max(s.identity_deviation, verify_binary_identity(*x));
    s.degenerate = s.degenerate || x->degenerate;
    samples += double(x->size());
    for (auto v : x->values) on_samples += v;
    s.total_time += x->span();
    const std::vector<Run> runs = runs_of(x->values);
    s.longest_dwell = std::max(s.longest_dwell, longest_dwell(*x, runs));
    const DwellTimes d = dwell_times(*x, runs);
    s.n_on += d.on.size();
    s.n_off += d.off.size();
    for (double t : d.on) on_time += t;
    for (double t : d.off) off_time += t;
  }
  s.filling = on_samples / samples;
  if (on_samples > 0.0) {
    const auto lv = on_level(recs, xs);
    s.on_level = lv.first;
    s.on_level_err = lv.second;
  }
  if (on_samples < samples) s.off_level = off_level(recs, xs);
  if (s.n_off >= 1) {
    s.mu = double(s.n_off) / off_time;
    s.mu_err = s.mu / std::sqrt(double(s.n_off));
  }
  if (s.n_on >= 1) {
    s.lambda = double(s.n_on) / on_time;
    s.lambda_err = s.lambda / std::sqrt(double(s.n_on));
  }
  if (s.rates_defined()) {
    s.tau = 1.0 / (s.mu + s.lambda);
    s.tau_err = s.tau * s.tau * std::hypot(s.mu_err, s.lambda_err);
    s.filling_err = std::sqrt(2.0 * s.filling * (1.0 - s.filling) * s.tau / s.total_time);
  }
  return s;
}

inline TelegraphStats telegraph_stats(const TrajectoryRecord& rec, const BinarySignal& x) {
  return telegraph_stats(std::vector<const TrajectoryRecord*>{&rec},
                         std::vector<const BinarySignal*>{&x});
}

/// Adds the autocorrelation timescale, with max_lag = 5 tau from the dwell rates.
inline void add_autocorrelation(TelegraphStats& s, const std::vector<const BinarySignal*>& xs) {
  if (!s.rates_defined()) return;
  const double dt = xs.at(0)->dt;
  const std::size_t max_lag = std::size_t(std::ceil(5.0 * s.tau / dt)) + 3;
  try {
    const AutocorrelationFit f = autocorrelation_timescale(xs, max_lag);
    s.tau_autocorr = f.tau;
    s.tau_autocorr_err = f.tau_err;
  } catch (const TelegraphError&) {
  }
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Asymptotic Kolmogorov tail with Stephens' finite-n correction.
inline double kolmogorov_p_value(double d, std::size_t n) {
  const double sn = std::sqrt(double(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  if (lam < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lam * lam);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample KS test against the exponential with the sample mean. The
/// rate is estimated from the same data, so the p-value is conservative.
inline KsResult dwell_distribution_test(std::vector<double> durations) {
  if (durations.size() < 50) throw TelegraphError("KS test needs at least 50 durations");
  std::sort(durations.begin(), durations.end());
  const double n = double(durations.size());
  const double mean = std::accumulate(durations.begin(), durations.end(), 0.0) / n;
  double d = 0.0;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const double f = 1.0 - std::exp(-durations[i] / mean);
    d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
  }
  return {d, kolmogorov_p_value(d, durations.size()), durations.size()};
}

enum class SwitchKind { blink_on, blink_off };

struct SwitchEvent {
  SwitchKind kind;
  double t_switch;   // first sample of the new phase
  double t_trigger;  // first jump after the last stable sample, NaN if none
  double window_start;
  double bin_width;
  std::vector<int> cavity_counts;
  std::vector<int> atom_counts;
  std::vector<double> trace_times;
  std::vector<double> trace_photons;
};

struct SwitchWindowOptions {
  double before = 5.0;
  double after = 5.0;
  double bin_width = 0.01;
  double stable_on_fraction = 0.8;   // blink-off: last sample with n >= this * ON level
  double stable_off_fraction = 0.1;  // blink-on: last sample with n <= this * threshold
};

/// Jump histograms and photon trace around every accepted transition.
inline std::vector<SwitchEvent> switch_event_extraction(const TrajectoryRecord& rec,
                                                        const BinarySignal& x,
                                                        const SwitchWindowOptions& opt = {}) {
  std::vector<SwitchEvent> out;
  if (x.degenerate) return out;
  const std::vector<Run> runs = runs_of(x.values);
  if (runs.size() < 2) return out;
  const double a = on_level(rec, x);
  const std::size_t nbins = std::size_t(std::llround((opt.before + opt.after) / opt.bin_width));
  for (std::size_t k = 1; k < runs.size(); ++k) {
    SwitchEvent ev;
    ev.kind = runs[k].value ? SwitchKind::blink_on : SwitchKind::blink_off;
    const std::size_t is = x.first_index + runs[k].start;
    ev.t_switch = rec.sample_times[is];
    ev.window_start = ev.t_switch - opt.before;
    ev.bin_width = opt.bin_width;
    ev.cavity_counts.assign(nbins, 0);
    ev.atom_counts.assign(nbins, 0);

    // last stable sample of the old phase
    std::size_t stable = is;
    const std::size_t lo = x.first_index + runs[k - 1].start;
    while (stable > lo) {
      --stable;
      const double n = rec.photon_number[stable];
      if (ev.kind == SwitchKind::blink_off ? n >= opt.stable_on_fraction * a
                                           : n <= opt.stable_off_fraction * x.threshold)
        break;
    }
    const double t_stable = rec.sample_times[stable];
    ev.t_trigger = nan_value;
    const auto first = std::lower_bound(rec.jumps.begin(), rec.jumps.end(), ev.window_start,
                                        [](const JumpEvent& j, double t) { return j.time < t; });
    for (auto it = first; it != rec.jumps.end() && it->time < ev.window_start + nbins * opt.bin_width;
         ++it) {
      const std::size_t b = std::size_t((it->time - ev.window_start) / opt.bin_width);
      if (b >= nbins) break;
      (it->channel == JumpChannel::cavity ? ev.cavity_counts : ev.atom_counts)[b]++;
      if (std::isnan(ev.t_trigger) && it->time > t_stable) ev.t_trigger = it->time;
    }
    for (std::size_t i = detail::first_sample_at(rec, ev.window_start);
         i < rec.size() && rec.sample_times[i] <= ev.t_switch + opt.after; ++i) {
      ev.trace_times.push_back(rec.sample_times[i]);
      ev.trace_photons.push_back(rec.photon_number[i]);
    }
    out.push_back(std::move(ev));
  }
  return out;
}

/// Decay rate of the photon number after a blink-off trigger: log-linear fit
/// of the trace from the trigger until n falls below `floor_fraction` of its
/// value at the trigger.
inline double ringdown_rate(const SwitchEvent& ev, double floor_fraction = 0.05) {
  if (ev.kind != SwitchKind::blink_off || std::isnan(ev.t_trigger))
    throw TelegraphError("ringdown needs a blink-off event with a trigger");
  std::vector<double> ts, ys, ws;
  double n0 = nan_value;
  for (std::size_t i = 0; i < ev.trace_times.size(); ++i) {
    if (ev.trace_times[i] < ev.t_trigger) continue;
    const double n = ev.trace_photons[i];
    if (std::isnan(n0)) n0 = n;
    if (!(n > floor_fraction * n0)) break;
    ts.push_back(ev.trace_times[i]);
    ys.push_back(std::log(n));
    ws.push_back(1.0);
  }
  if (ts.size() < 3) throw TelegraphError("ringdown trace too short");
  return -weighted_line_fit(ts, ys, ws).slope;
}

/// Exact two-state Markov process sampled on a grid, started from its
/// stationary distribution. Photon number is on_level or 0.
inline TrajectoryRecord synthesize_telegraph(double mu, double lambda, double on_level_value,
                                             double t_final, double dt_sample, std::uint64_t seed) {
  if (!(mu > 0.0) || !(lambda > 0.0)) throw TelegraphError("synthetic rates must be positive");
  TrajectoryRecord rec;
  rec.config.seed = seed;
  rec.config.t_final = t_final;
  rec.config.dt_sample = dt_sample;
  rec.config.dt_max = dt_sample;
  rec.config.burn_in = 0.0;
  rec.params.cutoff = std::max(1, int(std::ceil(on_level_value)));
  const std::size_t n = rec.config.sample_count();
  rec.sample_times.resize(n);
  rec.photon_number.resize(n);
  rec.field_amplitude.resize(n);
  rec.mandel_q.resize(n);
  rec.atom_excitation.assign(n, 0.0);

  CounterRng rng(seed);
  bool on = rng.uniform() < mu / (mu + lambda);
  double t_next = rng.exponential(on ? lambda : mu);
  const double amp = std::sqrt(on_level_value);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) * dt_sample;
    while (t_next <= t) {
      on = !on;
      t_next += rng.exponential(on ? lambda : mu);
    }
    rec.sample_times[i] = t;
    rec.photon_number[i] = on ? on_level_value : 0.0;
    rec.field_amplitude[i] = on ? amp : 0.0;
    rec.mandel_q[i] = on && on_level_value > q_floor ? 0.0 : nan_value;
  }
  return rec;
}

}  // namespace pbb

#endif  // PBB_TELEGRAPH_HPP
