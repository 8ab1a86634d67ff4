#ifndef PBB_MCWF_HPP
#define PBB_MCWF_HPP

// Monte-Carlo wavefunction unraveling of the driven-dissipative JC master
// equation with photodetection of the cavity output (jump operator
// sqrt(2 kappa) a) and of atomic fluorescence (sqrt(2 gamma) s).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pbb/model.hpp"
#include "pbb/ode.hpp"
#include "pbb/propagator.hpp"
#include "pbb/rng.hpp"

namespace pbb {

/// Below this photon number Q and the field phase are undefined.
inline constexpr double q_floor = 1e-6;

enum class Integrator { taylor, adaptive_rk };

inline const char* to_string(Integrator i) {
  return i == Integrator::taylor ? "taylor" : "adaptive_rk";
}

struct TrajectoryConfig {
  std::uint64_t seed = 1;
  double t_final = 1000.0;
  double dt_sample = 0.1;
  double dt_max = 0.1;
  double norm_tolerance = 1e-6;
  double burn_in = 200.0;
  Integrator integrator = Integrator::taylor;
  double rk_tolerance = 1e-8;
  int guard_levels = 3;
  double guard_threshold = 1e-6;

  std::size_t sample_count() const {
    return static_cast<std::size_t>(std::floor(t_final / dt_sample + 1e-9)) + 1;
  }

  void validate() const {
    if (!(dt_sample > 0.0) || !(dt_sample <= t_final))
      throw ModelError("need 0 < dt_sample <= t_final");
    if (!(dt_max > 0.0) || dt_max > dt_sample) throw ModelError("need 0 < dt_max <= dt_sample");
    if (!(norm_tolerance > 0.0) || norm_tolerance >= 1.0)
      throw ModelError("norm_tolerance must be in (0,1)");
    if (!(burn_in >= 0.0) || burn_in >= t_final) throw ModelError("burn_in must be in [0, t_final)");
    if (!(rk_tolerance > 0.0)) throw ModelError("rk_tolerance must be positive");
    if (guard_levels < 1) throw ModelError("guard_levels must be positive");
  }

  bool operator==(const TrajectoryConfig&) const = default;
};

enum class JumpChannel : int { cavity = 0, atom = 1 };

inline const char* to_string(JumpChannel c) { return c == JumpChannel::cavity ? "cavity" : "atom"; }

struct JumpEvent {
  double time;
  JumpChannel channel;
};

/// Sampled observables of one trajectory. Q is NaN where undefined.
struct TrajectoryRecord {
  std::vector<double> sample_times;
  std::vector<double> photon_number;
  std::vector<cplx> field_amplitude;
  std::vector<double> mandel_q;
  std::vector<double> atom_excitation;
  std::vector<JumpEvent> jumps;
  ModelParams params;
  TrajectoryConfig config;

  std::size_t size() const { return sample_times.size(); }
};

class CutoffBreach : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Observables of a (not necessarily normalized) state, divided by its norm.
struct Moments {
  double norm2 = 0.0;
  double n = 0.0;
  double n2 = 0.0;
  double excited = 0.0;
  cplx a{0.0, 0.0};
};

inline Moments moments(const Vector& psi) {
  Moments m;
  const Eigen::Index dim = psi.size();
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double p = std::norm(psi(i));
    const double n = photon_of(static_cast<int>(i));
    m.norm2 += p;
    m.n += n * p;
    m.n2 += n * n * p;
    if (atom_of(static_cast<int>(i)) == Atom::excited) m.excited += p;
    if (i >= 2) m.a += std::conj(psi(i - 2)) * psi(i) * std::sqrt(n);
  }
  if (m.norm2 > 0.0) {
    m.n /= m.norm2;
    m.n2 /= m.norm2;
    m.excited /= m.norm2;
    m.a /= m.norm2;
  }
  return m;
}

inline double mandel_q_from(const Moments& m) {
  if (!(m.n > q_floor)) return std::numeric_limits<double>::quiet_NaN();
  return (m.n2 - m.n * m.n - m.n) / m.n;
}

/// Instantaneous Mandel Q of the field in `state`; NaN below q_floor photons.
inline double instantaneous_mandel_q(const StateVector& state) {
  return mandel_q_from(moments(state.amplitudes()));
}

/// arg<a> per sample; NaN where |<a>|^2 < q_floor.
inline std::vector<double> field_phase(const TrajectoryRecord& record) {
  std::vector<double> out;
  out.reserve(record.field_amplitude.size());
  for (cplx a : record.field_amplitude)
    out.push_back(std::norm(a) < q_floor ? std::numeric_limits<double>::quiet_NaN() : std::arg(a));
  return out;
}

/// Population of the `top_levels` highest Fock indices against `threshold`.
inline bool cutoff_guard_ok(const Vector& psi, int cutoff, int top_levels, double threshold) {
  if (top_levels >= cutoff) throw ModelError("guard needs top_levels < cutoff");
  double top = 0.0, total = 0.0;
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    const double p = std::norm(psi(i));
    total += p;
    if (photon_of(static_cast<int>(i)) > cutoff - top_levels) top += p;
  }
  return top <= threshold * total;
}

inline bool cutoff_guard(const StateVector& state, int top_levels, double threshold) {
  return cutoff_guard_ok(state.amplitudes(), state.cutoff(), top_levels, threshold);
}

/// Cutoff for a bright level n_bright. Blink-on transients overshoot the
/// bright level by up to a factor of two, so the margin is taken around 2N.
inline int recommended_cutoff(double n_bright) {
  const double peak = 2.0 * n_bright;
  return static_cast<int>(std::ceil(peak + 6.0 * std::sqrt(peak) + 15.0));
}

enum class Observable { photon_number, atom_excitation, mandel_q, field_real, field_imag };

/// Uniform-grid mean of an observable over samples with t in [t_begin, t_end].
/// NaN samples (undefined Q) are skipped.
inline double time_average(const TrajectoryRecord& record, Observable which, double t_begin,
                           double t_end) {
  if (t_begin < record.config.burn_in - 1e-9 || t_end > record.config.t_final + 1e-9 ||
      t_end < t_begin)
    throw ModelError("averaging window outside [burn_in, t_final]");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < record.size(); ++k) {
    const double t = record.sample_times[k];
    if (t < t_begin - 1e-12 || t > t_end + 1e-12) continue;
    double v = 0.0;
    switch (which) {
      case Observable::photon_number: v = record.photon_number[k]; break;
      case Observable::atom_excitation: v = record.atom_excitation[k]; break;
      case Observable::mandel_q: v = record.mandel_q[k]; break;
      case Observable::field_real: v = record.field_amplitude[k].real(); break;
      case Observable::field_imag: v = record.field_amplitude[k].imag(); break;
    }
    if (std::isnan(v)) continue;
    sum += v;
    ++count;
  }
  if (count == 0) throw ModelError("empty averaging window");
  return sum / double(count);
}

inline double time_average(const TrajectoryRecord& record, Observable which) {
  return time_average(record, which, record.config.burn_in, record.config.t_final);
}

namespace detail {

class Sampler {
public:
  Sampler(TrajectoryRecord& rec) : rec_(rec) {
    const std::size_t n = rec.config.sample_count();
    rec_.sample_times.reserve(n);
    rec_.photon_number.reserve(n);
    rec_.field_amplitude.reserve(n);
    rec_.mandel_q.reserve(n);
    rec_.atom_excitation.reserve(n);
  }

  void record(std::size_t k, const Vector& psi) {
    const auto& cfg = rec_.config;
    if (!cutoff_guard_ok(psi, rec_.params.cutoff, cfg.guard_levels, cfg.guard_threshold))
      throw CutoffBreach("top Fock levels populated beyond guard threshold at t=" +
                         std::to_string(double(k) * cfg.dt_sample) + "; raise the cutoff");
    const Moments m = moments(psi);
    rec_.sample_times.push_back(double(k) * cfg.dt_sample);
    rec_.photon_number.push_back(m.n);
    rec_.field_amplitude.push_back(m.a);
    rec_.mandel_q.push_back(mandel_q_from(m));
    rec_.atom_excitation.push_back(m.excited);
  }

private:
  TrajectoryRecord& rec_;
};

/// Jump channel choice and application; psi is replaced by the normalized
/// post-jump state.
inline JumpChannel apply_jump(Vector& psi, const ModelParams& p, CounterRng& rng) {
  const Moments m = moments(psi);
  const double w_cav = 2.0 * p.kappa * m.n;
  const double w_atom = 2.0 * p.gamma * m.excited;
  const JumpChannel ch =
      rng.uniform() * (w_cav + w_atom) < w_cav ? JumpChannel::cavity : JumpChannel::atom;
  Vector out = Vector::Zero(psi.size());
  if (ch == JumpChannel::cavity) {
    for (Eigen::Index i = 2; i < psi.size(); ++i)
      out(i - 2) = std::sqrt(double(photon_of(static_cast<int>(i)))) * psi(i);
  } else {
    for (Eigen::Index i = 1; i < psi.size(); i += 2) out(i - 1) = psi(i);
  }
  const double nrm = out.norm();
  if (!(nrm > 0.0)) throw IntegratorError("jump applied to a state annihilated by its operator");
  psi = out / nrm;
  return ch;
}

inline Eigen::VectorXd loss_diagonal(const ModelParams& p) {
  Eigen::VectorXd gamma(p.dim());
  for (int i = 0; i < p.dim(); ++i)
    gamma(i) = p.kappa * photon_of(i) + (atom_of(i) == Atom::excited ? p.gamma : 0.0);
  return gamma;
}

/// Jump time inside a propagated interval: safeguarded Newton on
/// log|psi(s)|^2 - log r, whose derivative is -2 <loss>.
template <class Eval>
double locate_crossing(Eval&& eval, const Eigen::ArrayXd& loss, double span, double n_start,
                       double n_end, double r, double tol, Vector& psi) {
  double lo = 0.0, hi = span;
  double s = span * std::log(n_start / r) / std::log(n_start / n_end);
  for (int it = 0; it < 200; ++it) {
    if (!(s > lo && s < hi)) s = 0.5 * (lo + hi);
    eval(s, psi);
    const double n2 = psi.squaredNorm();
    const double rate = 2.0 * (loss * psi.array().abs2()).sum() / n2;
    const double phi = std::log(n2 / r);
    (phi > 0.0 ? lo : hi) = s;
    const double step = rate > 0.0 ? phi / rate : hi - lo;
    if (std::abs(step) < tol || hi - lo < tol) {
      const double next = s + step;
      if (std::abs(step) < tol && next > lo && next < hi) s = next;
      break;
    }
    s += step;
  }
  eval(s, psi);
  return s;
}

inline void run_taylor(TrajectoryRecord& rec, const Vector& psi0, CounterRng& rng) {
  const ModelParams& p = rec.params;
  const TrajectoryConfig& cfg = rec.config;
  const BandedOperator heff(build_effective_hamiltonian(p).matrix);
  const Eigen::ArrayXd loss = loss_diagonal(p).array();
  TaylorPropagator prop(heff);
  Sampler sampler(rec);
  sampler.record(0, psi0);

  Vector psi = psi0, end(psi0.size()), tmp(psi0.size());
  double t = 0.0;
  double w = std::min(cfg.dt_max, 0.01);
  double r = rng.uniform();
  const std::size_t samples = cfg.sample_count();
  const double t_end = double(samples - 1) * cfg.dt_sample;
  auto eval = [&prop](double s, Vector& out) { prop.evaluate(s, out); };

  std::size_t next = 1;
  while (next < samples) {
    double step = std::min(w, t_end - t);
    while (!prop.expand(psi, step)) {
      step *= 0.5;
      if (step < 1e-12) throw IntegratorError("Taylor propagator failed to converge");
    }
    const int used = prop.terms();
    w = std::min(cfg.dt_max, step * std::clamp(double(TaylorPropagator::target_terms) / used, 0.5, 2.0));

    prop.evaluate(step, end);
    const double n_end = end.squaredNorm();
    double t_stop = t + step;
    bool jump = false;
    double s_jump = step;
    if (n_end <= r) {
      jump = true;
      s_jump = locate_crossing(eval, loss, step, psi.squaredNorm(), n_end, r,
                               cfg.norm_tolerance * step, end);
      t_stop = t + s_jump;
    }
    while (next < samples && double(next) * cfg.dt_sample <= t_stop + 1e-12) {
      prop.evaluate(double(next) * cfg.dt_sample - t, tmp);
      sampler.record(next, tmp / tmp.norm());
      ++next;
    }
    t = t_stop;
    psi.swap(end);
    if (jump) {
      const JumpChannel ch = apply_jump(psi, p, rng);
      rec.jumps.push_back({t, ch});
      r = rng.uniform();
    }
  }
}

inline void run_adaptive_rk(TrajectoryRecord& rec, const Vector& psi0, CounterRng& rng) {
  const ModelParams& p = rec.params;
  const TrajectoryConfig& cfg = rec.config;
  const BandedOperator heff(build_effective_hamiltonian(p).matrix);
  auto rhs = [&heff](const Vector& y, Vector& dy) {
    heff.apply(y, dy);
    dy *= -I;
  };

  DormandPrince54<Vector> rk(cfg.rk_tolerance, cfg.rk_tolerance, cfg.dt_max);
  rk.reset(rhs, 0.0, psi0, std::min(cfg.dt_max, 1e-3));
  Sampler sampler(rec);
  sampler.record(0, psi0);

  double r = rng.uniform();
  std::size_t next = 1;
  const std::size_t samples = cfg.sample_count();
  const double t_end = double(samples - 1) * cfg.dt_sample;
  Vector tmp(psi0.size());

  while (next < samples) {
    rk.advance(rhs, t_end);
    double t_stop = rk.t();
    std::optional<double> t_jump;
    if (rk.y().squaredNorm() <= r) {
      double lo = rk.t_prev(), hi = rk.t();
      const double tol = cfg.norm_tolerance * (hi - lo);
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        rk.dense(mid, tmp);
        (tmp.squaredNorm() > r ? lo : hi) = mid;
      }
      t_jump = hi;
      t_stop = hi;
    }
    while (next < samples && double(next) * cfg.dt_sample <= t_stop + 1e-12) {
      const double ts = double(next) * cfg.dt_sample;
      if (ts >= rk.t() - 1e-12) tmp = rk.y(); else rk.dense(ts, tmp);
      sampler.record(next, tmp / tmp.norm());
      ++next;
    }
    if (t_jump) {
      rk.dense(*t_jump, tmp);
      const JumpChannel ch = apply_jump(tmp, p, rng);
      rec.jumps.push_back({*t_jump, ch});
      rk.reset(rhs, *t_jump, tmp);
      r = rng.uniform();
    }
  }
}

}  // namespace detail

/// Integrates one quantum trajectory from `initial` up to config.t_final.
inline TrajectoryRecord run_trajectory(const ModelParams& params, const TrajectoryConfig& config,
                                       const StateVector& initial) {
  params.validate();
  config.validate();
  if (initial.cutoff() != params.cutoff) throw ModelError("initial state cutoff mismatch");
  if (!initial.is_normalized()) throw ModelError("initial state is not normalized");
  if (config.guard_levels >= params.cutoff) throw ModelError("guard_levels must be below cutoff");

  TrajectoryRecord rec;
  rec.params = params;
  rec.config = config;
  CounterRng rng(config.seed);
  if (config.integrator == Integrator::taylor)
    detail::run_taylor(rec, initial.amplitudes(), rng);
  else
    detail::run_adaptive_rk(rec, initial.amplitudes(), rng);
  return rec;
}

inline TrajectoryRecord run_trajectory(const ModelParams& params, const TrajectoryConfig& config) {
  return run_trajectory(params, config, StateVector::basis(Atom::ground, 0, params.cutoff));
}

}  // namespace pbb

#endif  // PBB_MCWF_HPP
