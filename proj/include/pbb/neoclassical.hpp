#ifndef PBB_NEOCLASSICAL_HPP
#define PBB_NEOCLASSICAL_HPP

// Neoclassical (coherent field + two-level atom) self-consistency and the
// analytic estimates derived from it. x is the photon number in units of
// N_scale = g^2/(4 kappa^2). Only the Delta < 0 half-plane is treated.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "pbb/model.hpp"

namespace pbb {

class NeoclassicalError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

inline double n_scale(double g, double kappa = 1.0) { return g * g / (4.0 * kappa * kappa); }

struct BranchSet {
  double delta = 0.0;
  double eta = 0.0;
  double g = 0.0;
  std::vector<double> solutions;  // ascending
  double n_scale = 0.0;

  bool bistable() const { return solutions.size() == 3; }
  double photons(std::size_t i) const { return solutions.at(i) * n_scale; }
};

namespace detail {

inline void require_negative_detuning(double delta) {
  if (!(delta < 0.0)) throw NeoclassicalError("self-consistent equation needs delta < 0");
}

// Driven term f(x) of x = f(x). The detuning enters as Delta + 1/sqrt(...),
// the sign that makes the bright root resonant at Delta = -g/(2 sqrt N) for
// Delta < 0, consistent with the bright-state self-consistency below.
inline double neoclassical_drive(double x, double delta, double eta, double g, double kappa) {
  const double dk = delta / kappa;
  const double inner = 1.0 / std::sqrt(delta * delta * kappa * kappa / (g * g * g * g) + x);
  const double s = dk + inner;
  const double c = 2.0 * eta / g;
  return c * c / (1.0 + s * s);
}

}  // namespace detail

inline double residual(double x, double delta, double eta, double g, double kappa = 1.0) {
  detail::require_negative_detuning(delta);
  if (!(x > 0.0)) throw NeoclassicalError("residual needs x > 0");
  if (!(g > 0.0)) throw NeoclassicalError("residual needs g > 0");
  return x - detail::neoclassical_drive(x, delta, eta, g, kappa);
}

namespace detail {

inline std::vector<double> scan_grid(double x_lo, double x_hi, int points) {
  std::vector<double> grid;
  grid.reserve(2 * points);
  const double la = std::log(x_lo), lb = std::log(x_hi);
  for (int i = 0; i < points; ++i) grid.push_back(std::exp(la + (lb - la) * i / (points - 1)));
  const double lin_lo = std::max(1e-3, x_lo);
  for (int i = 0; i < points; ++i) grid.push_back(lin_lo + (x_hi - lin_lo) * i / (points - 1));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

inline double bisect_root(double a, double b, double fa, double delta, double eta, double g,
                          double kappa) {
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = residual(m, delta, eta, g, kappa);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
    if (b - a <= 1e-12 * b) break;
  }
  return 0.5 * (a + b);
}

inline std::vector<double> scan_roots(double delta, double eta, double g, double kappa,
                                      int points) {
  const double f0 = neoclassical_drive(0.0, delta, eta, g, kappa);
  const double c = 2.0 * eta / g;
  const double x_hi = 4.0 * c * c + 1.0;
  const double x_lo = std::min(1e-3, 0.5 * f0);
  const std::vector<double> grid = scan_grid(x_lo, x_hi, points);
  std::vector<double> roots;
  double xa = grid.front();
  double fa = residual(xa, delta, eta, g, kappa);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double xb = grid[i];
    const double fb = residual(xb, delta, eta, g, kappa);
    if (fb == 0.0) {
      roots.push_back(xb);
    } else if ((fa < 0.0) != (fb < 0.0) && fa != 0.0) {
      roots.push_back(bisect_root(xa, xb, fa, delta, eta, g, kappa));
    }
    xa = xb;
    fa = fb;
  }
  return roots;
}

}  // namespace detail

inline BranchSet solve_branches(double delta, double eta, double g, double kappa = 1.0) {
  detail::require_negative_detuning(delta);
  if (!(g > 0.0)) throw NeoclassicalError("solve_branches needs g > 0");
  if (!(eta >= 0.0)) throw NeoclassicalError("solve_branches needs eta >= 0");
  BranchSet out{delta, eta, g, {}, n_scale(g, kappa)};
  if (eta == 0.0) {
    out.solutions = {0.0};
    return out;
  }
  std::vector<double> roots = detail::scan_roots(delta, eta, g, kappa, 2000);
  if (roots.size() % 2 == 0) roots = detail::scan_roots(delta, eta, g, kappa, 20000);
  if (roots.size() % 2 == 0)
    throw NeoclassicalError("even number of neoclassical branches after grid refinement");
  for (double x : roots)
    if (!(std::abs(residual(x, delta, eta, g, kappa)) < 1e-10))
      throw NeoclassicalError("branch residual above 1e-10");
  out.solutions = std::move(roots);
  return out;
}

struct BistabilityWindow {
  std::optional<double> eta_lower;
  std::optional<double> eta_upper;
};

/// Locates the 1->3 and 3->1 transitions of the branch count along eta_grid
/// and bisects each to 1e-6 relative. Ends that are not bracketed by the
/// grid stay empty.
inline BistabilityWindow bistability_boundaries(double delta, double g,
                                                const std::vector<double>& eta_grid,
                                                double kappa = 1.0) {
  detail::require_negative_detuning(delta);
  if (eta_grid.size() < 2) throw NeoclassicalError("eta grid needs at least two points");
  auto count = [&](double eta) { return solve_branches(delta, eta, g, kappa).solutions.size(); };
  auto refine = [&](double lo, double hi, std::size_t count_lo) {
    while (hi - lo > 1e-6 * hi) {
      const double m = 0.5 * (lo + hi);
      (count(m) == count_lo ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
  };
  BistabilityWindow w;
  std::size_t prev = count(eta_grid[0]);
  for (std::size_t i = 1; i < eta_grid.size(); ++i) {
    const std::size_t c = count(eta_grid[i]);
    if (prev == 1 && c == 3 && !w.eta_lower) w.eta_lower = refine(eta_grid[i - 1], eta_grid[i], 1);
    if (prev == 3 && c == 1 && !w.eta_upper) {
      w.eta_upper = refine(eta_grid[i - 1], eta_grid[i], 3);
      break;
    }
    prev = c;
  }
  return w;
}

inline double lower_boundary_estimate(double delta, double kappa = 1.0) {
  detail::require_negative_detuning(delta);
  return kappa / (2.0 * std::abs(delta));
}

struct ResonantBrightState {
  double n;  // (eta/kappa)^2
  /// Coupling that puts this photon number on resonance at the given detuning.
  double resonant_coupling(double delta) const { return 2.0 * std::sqrt(n) * std::abs(delta); }
  /// Detuning resonant with this photon number at coupling g.
  double resonant_detuning(double g) const { return -g / (2.0 * std::sqrt(n)); }
};

inline ResonantBrightState resonance_photon_number(double eta, double kappa = 1.0) {
  if (!(eta >= 0.0)) throw NeoclassicalError("eta must be non-negative");
  return {(eta / kappa) * (eta / kappa)};
}

inline double bright_photon_estimate(double g, double delta) {
  if (delta == 0.0) throw NeoclassicalError("bright photon estimate needs delta != 0");
  return g * g / (2.0 * delta * delta);
}

/// Right-hand side of the bright-state self-consistency n = eta^2 / |kappa - i(delta + g/(2 sqrt n))|^2.
inline double bright_self_consistency(double n, double g, double delta, double eta,
                                      double kappa = 1.0) {
  const double shift = delta + g / (2.0 * std::sqrt(n));
  return eta * eta / (kappa * kappa + shift * shift);
}

/// arg of 1/(kappa - i(delta + g/(2 sqrt N))). For delta > 0 the bright state
/// lives on the other ladder and the g term changes sign, mirroring the phase.
inline double expected_bright_phase(double n, const ModelParams& p) {
  if (!(n > 0.0)) throw NeoclassicalError("expected bright phase needs N > 0");
  const double ladder = p.delta > 0.0 ? -1.0 : 1.0;
  const cplx z = 1.0 / cplx(p.kappa, -(p.delta + ladder * p.g / (2.0 * std::sqrt(n))));
  return std::arg(z);
}

inline double blink_off_rate_law(double n, double kappa = 1.0) {
  if (!(n > 0.0)) throw NeoclassicalError("rate law needs N > 0");
  return kappa / n;
}

struct PhaseBoundaryRow {
  double delta;
  std::optional<double> eta_lower_over_g;
  std::optional<double> eta_upper_over_g;
};

struct PhaseBoundary {
  double g = 0.0;
  std::vector<PhaseBoundaryRow> rows;
};

inline PhaseBoundary phase_diagram(double g, const std::vector<double>& delta_grid,
                                   const std::vector<double>& eta_over_g_grid) {
  PhaseBoundary out{g, {}};
  std::vector<double> eta_grid;
  for (double r : eta_over_g_grid) eta_grid.push_back(r * g);
  for (double delta : delta_grid) {
    const BistabilityWindow w = bistability_boundaries(delta, g, eta_grid);
    PhaseBoundaryRow row{delta, {}, {}};
    if (w.eta_lower) row.eta_lower_over_g = *w.eta_lower / g;
    if (w.eta_upper) row.eta_upper_over_g = *w.eta_upper / g;
    out.rows.push_back(row);
  }
  return out;
}

/// Rows for one or more couplings; unbracketed boundaries are written empty.
inline void write_phase_diagram_csv(std::ostream& os, const std::vector<PhaseBoundary>& curves) {
  os << "delta_over_kappa,eta_lower_over_g,eta_upper_over_g,g_over_kappa\n";
  char buf[64];
  auto put = [&](const std::optional<double>& v) {
    if (v) {
      std::snprintf(buf, sizeof buf, "%.17g", *v);
      os << buf;
    }
  };
  for (const auto& c : curves)
    for (const auto& r : c.rows) {
      std::snprintf(buf, sizeof buf, "%.17g,", r.delta);
      os << buf;
      put(r.eta_lower_over_g);
      os << ',';
      put(r.eta_upper_over_g);
      std::snprintf(buf, sizeof buf, ",%.17g\n", c.g);
      os << buf;
    }
}

}  // namespace pbb

#endif  // PBB_NEOCLASSICAL_HPP
