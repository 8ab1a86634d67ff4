#include <gtest/gtest.h>

#include <set>

#include "pbb/scaling.hpp"

using namespace pbb;

namespace {

SweepPoint fake_point(double g, double eta, double filling, double filling_err, double tau = 100.0,
                      double lambda = 0.01) {
  SweepPoint p;
  p.g = g;
  p.eta = eta;
  p.stats.filling = filling;
  p.stats.filling_err = filling_err;
  p.stats.n_on = p.stats.n_off = 50;
  p.stats.tau = tau;
  p.stats.tau_err = 0.05 * tau;
  p.stats.lambda = lambda;
  p.stats.lambda_err = 0.1 * lambda;
  p.stats.total_time = 60000.0;
  p.stats.longest_dwell = 1000.0;
  return p;
}

std::vector<SweepPoint> linear_filling_sweep(double g, double noise = 0.0, std::uint64_t seed = 0) {
  CounterRng rng(seed);
  std::vector<SweepPoint> out;
  for (double r = 0.2; r < 0.81; r += 0.1) {
    const double f = 0.1 + 0.8 * r + (noise > 0.0 ? noise * rng.normal() : 0.0);
    out.push_back(fake_point(g, r * g, f, noise > 0.0 ? noise : 0.01, 10.0 + r * g));
  }
  return out;
}

}  // namespace

TEST(PowerLaw, ExactDataRecoversExponent) {
  const std::vector<double> x{20, 30, 40, 50};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -2.0));
  const ExponentFit f = fit_power_law(x, y);
  EXPECT_NEAR(f.exponent, -2.0, 1e-10);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-9);
  EXPECT_EQ(f.dof, 2u);
  for (double r : f.residuals) EXPECT_NEAR(r, 0.0, 1e-12);
}

TEST(PowerLaw, NoisyDataCoverage) {
  const std::vector<double> x{20, 30, 40, 50};
  int one_sigma = 0, two_sigma = 0;
  const int seeds = 400;
  for (int s = 0; s < seeds; ++s) {
    CounterRng rng(stream_seed(3, std::uint64_t(s)));
    std::vector<double> y, sig;
    for (double v : x) {
      const double truth = 0.02 * std::pow(v, 2.2);
      y.push_back(truth * (1.0 + 0.05 * rng.normal()));
      sig.push_back(0.05 * truth);
    }
    const ExponentFit f = fit_power_law(x, y, sig);
    one_sigma += std::abs(f.exponent - 2.2) < f.exponent_err;
    two_sigma += std::abs(f.exponent - 2.2) < 2.0 * f.exponent_err;
  }
  EXPECT_GE(double(one_sigma) / seeds, 0.65);
  EXPECT_GE(double(two_sigma) / seeds, 0.93);
}

TEST(PowerLaw, RejectsBadInput) {
  EXPECT_THROW(fit_power_law({1, 2}, {1, 2}), ScalingError);
  EXPECT_THROW(fit_power_law({1, 2, 3}, {1, -2, 3}), ScalingError);
  EXPECT_THROW(fit_power_law({1, 2, 3}, {1, 2}), ScalingError);
  EXPECT_THROW(fit_power_law({1, 2, 3}, {1, 2, 3}, {0.1, 0.0, 0.1}), ScalingError);
}

TEST(EtaStar, LinearFillingCrossesAtHalfG) {
  for (double g : {20.0, 50.0}) {
    const EtaStar s = find_eta_star(linear_filling_sweep(g));
    EXPECT_NEAR(s.eta_star, g / 2.0, 1e-10);
    EXPECT_FALSE(s.extrapolated);
    EXPECT_EQ(s.etas_used.size(), 4u);
    EXPECT_NEAR(s.slope * g, 0.8, 1e-10);
  }
}

TEST(EtaStar, NoisyCoverage) {
  int inside = 0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    const EtaStar e = find_eta_star(linear_filling_sweep(40.0, 0.02, 1000 + s));
    inside += std::abs(e.eta_star - 20.0) < 2.0 * e.eta_star_err;
  }
  EXPECT_GE(double(inside) / seeds, 0.9);
}

TEST(EtaStar, ExtrapolationLimit) {
  std::vector<SweepPoint> low;
  for (double eta : {10.0, 15.0, 20.0}) low.push_back(fake_point(50.0, eta, 0.09 + 0.02 * eta, 0.01));
  // reaches 0.5 at 20.5, within 10% of the 10-unit span beyond the last point
  const EtaStar e = find_eta_star(low);
  EXPECT_TRUE(e.extrapolated);
  EXPECT_NEAR(e.eta_star, 20.5, 1e-9);
  std::vector<SweepPoint> far;
  for (double r : {0.1, 0.15, 0.2}) far.push_back(fake_point(50.0, r * 50.0, r, 0.01));
  EXPECT_THROW(find_eta_star(far), ScalingError);
}

TEST(EtaStar, RejectsDecreasingOrUnusable) {
  std::vector<SweepPoint> down;
  for (double r : {0.2, 0.3, 0.4}) down.push_back(fake_point(50.0, r * 50.0, 1.0 - r, 0.01));
  EXPECT_THROW(find_eta_star(down), ScalingError);
  std::vector<SweepPoint> bad = linear_filling_sweep(50.0);
  for (auto& p : bad) p.degenerate = true;
  EXPECT_THROW(find_eta_star(bad), ScalingError);
}

TEST(TauStar, ConstantAndLinearTimescales) {
  std::vector<SweepPoint> sweep = linear_filling_sweep(50.0);
  for (auto& p : sweep) p.stats.tau = 123.0;
  const EtaStar e = find_eta_star(sweep);
  EXPECT_NEAR(timescale_at_eta_star(e, sweep).tau, 123.0, 1e-9);
  // tau = 10 + eta in linear_filling_sweep
  const std::vector<SweepPoint> lin = linear_filling_sweep(50.0);
  const TauStar t = timescale_at_eta_star(find_eta_star(lin), lin);
  EXPECT_NEAR(t.tau, 35.0, 1e-9);
  EXPECT_GT(t.tau_err, 0.0);
  EXPECT_THROW(timescale_at_eta_star(e, sweep, TimescaleSource::autocorrelation), ScalingError);
}

TEST(TauStar, PeakedTimescaleInterpolatedLocally) {
  // tau peaks at eta* = 25; a line through the whole window would miss it
  std::vector<SweepPoint> sweep = linear_filling_sweep(50.0);
  for (auto& p : sweep) {
    p.stats.tau = 200.0 - 8.0 * std::abs(p.eta - 25.0);
    p.stats.tau_err = 2.0;
  }
  const EtaStar e = find_eta_star(sweep);
  ASSERT_NEAR(e.eta_star, 25.0, 1e-9);
  const TauStar t = timescale_at_eta_star(e, sweep);
  EXPECT_NEAR(t.tau, 200.0, 1e-9);
  // the grid point's own error plus the segment slope (8 either side) times sigma(eta*)
  EXPECT_NEAR(t.tau_err, std::hypot(2.0, 8.0 * e.eta_star_err), 1e-9);
}

TEST(Lambda, MeanOverGuardedPoints) {
  std::vector<SweepPoint> a{fake_point(20, 4, 0.3, 0.01, 100, 0.02),
                            fake_point(20, 5, 0.5, 0.01, 100, 0.04),
                            fake_point(20, 6, 0.7, 0.01, 100, 0.9)};
  a[2].stats.longest_dwell = 0.5 * a[2].stats.total_time;  // fails the truncation guard
  a.push_back(fake_point(20, 3, 0.02, 0.01, 100, 0.5));     // ON excursions at near-empty filling
  const auto l = lambda_vs_g({a});
  ASSERT_EQ(l.size(), 1u);
  EXPECT_EQ(l[0].points, 2u);
  EXPECT_NEAR(l[0].lambda_mean, 0.03, 1e-15);
  EXPECT_NEAR(l[0].spread, 0.02 / 0.03, 1e-12);
  EXPECT_NEAR(l[0].lambda_err, std::hypot(0.002, 0.004) / 2.0, 1e-15);
  a.erase(a.begin() + 1, a.end());
  EXPECT_THROW(lambda_vs_g({a}), ScalingError);
}

TEST(Lambda, InverseSquareLawRecovered) {
  std::vector<std::vector<SweepPoint>> sweeps;
  std::vector<double> gs, ls;
  for (double g : {20.0, 30.0, 40.0, 50.0}) {
    const double lam = 4.0 / (g * g);
    sweeps.push_back({fake_point(g, 0.2 * g, 0.4, 0.01, 1, lam),
                      fake_point(g, 0.25 * g, 0.6, 0.01, 1, lam)});
  }
  for (const auto& l : lambda_vs_g(sweeps)) {
    gs.push_back(l.g);
    ls.push_back(l.lambda_mean);
  }
  EXPECT_NEAR(fit_power_law(gs, ls).exponent, -2.0, 1e-10);
}

TEST(Seeds, DeriveFromKeyNotOrder) {
  EXPECT_EQ(point_key(50, 12.5, 0, -5), point_key(50.0, 12.5, 0.0, -5.0));
  EXPECT_NE(point_key(50, 12.5, 0, -5), point_key(50, 12.5, 0.01, -5));
  EXPECT_EQ(point_seed(1, "a"), point_seed(1, "a"));
  EXPECT_NE(point_seed(1, "a"), point_seed(2, "a"));
  EXPECT_NE(point_seed(1, "a"), point_seed(1, "b"));
  PointSpec spec;
  spec.g = 20.0;
  spec.eta = 4.8;
  spec.budget = {500.0, 3};
  spec.base.burn_in = 50.0;
  std::set<std::uint64_t> seeds;
  for (int s = 0; s < 3; ++s) {
    const TrajectoryConfig c = seed_config(spec, s);
    seeds.insert(c.seed);
    EXPECT_DOUBLE_EQ(c.t_final, 550.0);
  }
  EXPECT_EQ(seeds.size(), 3u);
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Spec, CutoffFollowsBrightEstimate) {
  PointSpec spec;
  spec.g = 50.0;
  EXPECT_EQ(spec.params().cutoff, recommended_cutoff(50.0));
  spec.cutoff = 90;
  EXPECT_EQ(spec.params().cutoff, 90);
}

TEST(AnalyzePoint, PooledSyntheticRecords) {
  PointSpec spec;
  spec.g = 50.0;
  spec.eta = 12.5;
  std::vector<TrajectoryRecord> recs;
  for (std::uint64_t s = 0; s < 4; ++s) recs.push_back(synthesize_telegraph(0.01, 0.02, 50.0, 2.5e4, 0.1, 60 + s));
  // a seed that stays dark is still binarized at the pooled threshold
  recs.push_back(synthesize_telegraph(1e-9, 1.0, 50.0, 2.5e4, 0.1, 99));
  const SweepPoint p = analyze_point(spec, recs);
  EXPECT_FALSE(p.degenerate) << p.note;
  EXPECT_NEAR(p.threshold, 0.5 * p.mean_photons, 1e-12);
  EXPECT_NEAR(p.stats.mu / 0.01, 1.0, 0.15);
  EXPECT_NEAR(p.stats.lambda / 0.02, 1.0, 0.15);
  EXPECT_NEAR(p.stats.on_level, 50.0, 1.0);
  EXPECT_NEAR(p.stats.tau_autocorr / p.stats.tau, 1.0, 0.2);
  EXPECT_EQ(p.on_durations.size(), p.stats.n_on);
  EXPECT_GT(p.ks_on_p, 1e-3);
  EXPECT_TRUE(p.usable());
  // the dark seed is one dwell spanning a fifth of the pooled time
  EXPECT_FALSE(p.passes_truncation_guard());
}

TEST(AnalyzePoint, DarkPointIsDegenerate) {
  PointSpec spec;
  spec.g = 50.0;
  std::vector<TrajectoryRecord> recs{synthesize_telegraph(1e-9, 1.0, 50.0, 1000.0, 0.1, 1)};
  const SweepPoint p = analyze_point(spec, recs);
  EXPECT_TRUE(p.degenerate);
  EXPECT_FALSE(p.usable());
}

TEST(SimulatePoint, RejectsEmptyBudget) {
  PointSpec spec;
  spec.budget.seeds = 0;
  EXPECT_THROW(simulate_point(spec), ScalingError);
}

TEST(Window, WorkpointInsideNeoclassicalWindow) {
  EXPECT_TRUE(inside_bistable_window(50.0, 12.5, -5.0));
  EXPECT_FALSE(inside_bistable_window(50.0, 2.5, -5.0));
}
