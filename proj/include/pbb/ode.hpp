#ifndef PBB_ODE_HPP
#define PBB_ODE_HPP

/*
 * Runge-Kutta based on the order 5(4) Dormand/Prince pair with the
 * 4th-order continuous extension of Hairer & Wanner (dopri5 "contd5").
 *
 * The stepper owns the state between accepted steps; dense output is valid
 * on [t_prev(), t()] of the most recent accepted step.
 */

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pbb {

class IntegratorError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

template <class Vec>
class DormandPrince54 {
public:
  DormandPrince54(double rtol, double atol, double h_max)
      : rtol_(rtol), atol_(atol), h_max_(h_max) {}

  /// Restart from (t, y); the next step size is kept unless h_init > 0.
  template <class F>
  void reset(F& f, double t, const Vec& y, double h_init = 0.0) {
    t_ = t_prev_ = t;
    y_ = y;
    f(y_, k1_);
    if (h_init > 0.0) h_ = std::min(h_init, h_max_);
    if (h_ <= 0.0) h_ = std::min(h_max_, 1e-3);
  }

  /// One accepted step, never past t_limit.
  template <class F>
  void advance(F& f, double t_limit) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      double h = std::min(h_, t_limit - t_);
      const bool clipped = h < h_;
      if (!(h > 0.0)) throw IntegratorError("non-positive step requested");
      const double err = trial(f, h);
      if (err <= 1.0) {
        t_prev_ = t_;
        t_ = (clipped ? t_limit : t_ + h);
        h_used_ = h;
        std::swap(y0_, y_);  // y0_ keeps the step start for dense output
        y_ = y1_;
        k1_prev_ = k1_;
        k1_ = k7_;  // FSAL
        prepare_dense(h);
        const double grow = err == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(err, -0.2));
        if (!clipped) h_ = std::min(h_max_, h * grow);
        return;
      }
      h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h_ < 1e-14 * std::max(1.0, std::abs(t_)))
        throw IntegratorError("step size underflow in Dormand-Prince integrator");
    }
    throw IntegratorError("Dormand-Prince step rejected repeatedly");
  }

  double t() const { return t_; }
  double t_prev() const { return t_prev_; }
  double step_size() const { return h_; }
  const Vec& y() const { return y_; }

  /// Continuous extension on the last accepted step.
  void dense(double t, Vec& out) const {
    const double theta = (t - t_prev_) / h_used_;
    const double theta1 = 1.0 - theta;
    out = r1_ + theta * (r2_ + theta1 * (r3_ + theta * (r4_ + theta1 * r5_)));
  }

private:
  template <class F>
  double trial(F& f, double h) {
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                            a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                            a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

    tmp_ = y_ + h * a21 * k1_;
    f(tmp_, k2_);
    tmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
    f(tmp_, k3_);
    tmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    f(tmp_, k4_);
    tmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    f(tmp_, k5_);
    tmp_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    f(tmp_, k6_);
    y1_ = y_ + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    f(y1_, k7_);
    tmp_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

    double sum = 0.0;
    for (Eigen::Index i = 0; i < tmp_.size(); ++i) {
      const double scale = atol_ + rtol_ * std::max(std::abs(y_(i)), std::abs(y1_(i)));
      sum += std::norm(tmp_(i)) / (scale * scale);
    }
    return std::sqrt(sum / double(tmp_.size()));
  }

  void prepare_dense(double h) {
    static constexpr double d1 = -12715105075.0 / 11282082432.0,
                            d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0,
                            d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0,
                            d7 = 69997945.0 / 29380423.0;
    r1_ = y0_;
    r2_ = y_ - y0_;
    r3_ = h * k1_prev_ - r2_;
    r4_ = r2_ - h * k7_ - r3_;
    r5_ = h * (d1 * k1_prev_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
  }

  double rtol_, atol_, h_max_;
  double h_ = 0.0, h_used_ = 0.0;
  double t_ = 0.0, t_prev_ = 0.0;
  Vec y_, y0_, y1_, tmp_;
  Vec k1_, k1_prev_, k2_, k3_, k4_, k5_, k6_, k7_;
  Vec r1_, r2_, r3_, r4_, r5_;
};

}  // namespace pbb

#endif  // PBB_ODE_HPP
