#ifndef PBB_PROPAGATOR_HPP
#define PBB_PROPAGATOR_HPP

// Banded storage for the effective Hamiltonian and a Taylor-series
// exponential propagator for dpsi/dt = -i H psi with constant H.
//
// In the (g,0),(e,0),(g,1),... ordering the JC coupling sits on the first
// off-diagonals and the drive on the second, so H_eff is pentadiagonal.
// Both classes keep real and imaginary parts in separate arrays so the inner
// loops vectorize.

#include <array>
#include <cmath>
#include <vector>

#include "pbb/model.hpp"

namespace pbb {

/// Complex vector with split storage.
struct SplitVector {
  std::vector<double> re, im;

  SplitVector() = default;
  explicit SplitVector(std::size_t n) : re(n, 0.0), im(n, 0.0) {}

  std::size_t size() const { return re.size(); }

  void assign(const Vector& v) {
    re.resize(v.size());
    im.resize(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      re[i] = v(i).real();
      im[i] = v(i).imag();
    }
  }

  void store(Vector& v) const {
    v.resize(static_cast<Eigen::Index>(re.size()));
    for (std::size_t i = 0; i < re.size(); ++i) v(static_cast<Eigen::Index>(i)) = {re[i], im[i]};
  }

  double squared_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < re.size(); ++i) s += re[i] * re[i] + im[i] * im[i];
    return s;
  }
};

class BandedOperator {
public:
  static constexpr int half_width = 2;

  BandedOperator() = default;

  explicit BandedOperator(const SparseMatrix& m) : dim_(static_cast<int>(m.rows())) {
    for (int b = 0; b < bands; ++b) {
      re_[b].assign(dim_, 0.0);
      im_[b].assign(dim_, 0.0);
    }
    for (int col = 0; col < m.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
        const int offset = col - static_cast<int>(it.row());
        if (std::abs(offset) > half_width)
          throw ModelError("operator is not pentadiagonal in the JC basis ordering");
        re_[offset + half_width][it.row()] = it.value().real();
        im_[offset + half_width][it.row()] = it.value().imag();
      }
    }
  }

  int dim() const { return dim_; }

  /// y = (A - shift) x on split vectors.
  void apply(const SplitVector& x, SplitVector& y, double shift = 0.0) const {
    const int n = dim_;
    y.re.resize(n);
    y.im.resize(n);
    const double* __restrict xr = x.re.data();
    const double* __restrict xi = x.im.data();
    double* __restrict yr = y.re.data();
    double* __restrict yi = y.im.data();
    {
      const double* __restrict ar = re_[half_width].data();
      const double* __restrict ai = im_[half_width].data();
      for (int i = 0; i < n; ++i) {
        const double dr = ar[i] - shift;
        yr[i] = dr * xr[i] - ai[i] * xi[i];
        yi[i] = dr * xi[i] + ai[i] * xr[i];
      }
    }
    for (int o = 1; o <= half_width; ++o) {
      const double* __restrict ur = re_[half_width + o].data();
      const double* __restrict ui = im_[half_width + o].data();
      const double* __restrict lr = re_[half_width - o].data();
      const double* __restrict li = im_[half_width - o].data();
      for (int i = 0; i < n - o; ++i) {
        yr[i] += ur[i] * xr[i + o] - ui[i] * xi[i + o];
        yi[i] += ur[i] * xi[i + o] + ui[i] * xr[i + o];
      }
      for (int i = o; i < n; ++i) {
        yr[i] += lr[i] * xr[i - o] - li[i] * xi[i - o];
        yi[i] += lr[i] * xi[i - o] + li[i] * xr[i - o];
      }
    }
  }

  void apply(const Vector& x, Vector& y) const {
    SplitVector xs, ys;
    xs.assign(x);
    apply(xs, ys);
    ys.store(y);
  }

private:
  static constexpr int bands = 2 * half_width + 1;
  int dim_ = 0;
  // re_[o + 2][i] + i im_[o + 2][i] = A(i, i + o)
  std::array<std::vector<double>, bands> re_, im_;
};

/// Exponential of -i H w applied to psi as a truncated Taylor series.
///
/// The series is taken for H - E0 with E0 the real part of the energy of the
/// current state; the discarded global phase is unobservable. The terms are
/// kept, so psi(s) for any s in [0, w] is a polynomial evaluation.
class TaylorPropagator {
public:
  static constexpr int max_terms = 64;
  static constexpr int target_terms = 40;

  explicit TaylorPropagator(const BandedOperator& h, double tolerance = 1e-12)
      : h_(&h), tol_(tolerance), terms_(max_terms + 1) {
    for (auto& t : terms_) t = SplitVector(h.dim());
  }

  /// Expands around `psi` with step `w`. Returns false when the series has not
  /// converged within max_terms; the caller should shrink w.
  bool expand(const Vector& psi, double w) {
    w_ = w;
    const int n = h_->dim();
    SplitVector& t0 = terms_[0];
    t0.assign(psi);
    const double norm2 = t0.squared_norm();
    h_->apply(t0, work_);
    double e0 = 0.0;
    for (int i = 0; i < n; ++i) e0 += t0.re[i] * work_.re[i] + t0.im[i] * work_.im[i];
    e0 /= norm2;
    const double stop2 = tol_ * tol_ * norm2;
    for (int i = 0; i < n; ++i) {
      work_.re[i] -= e0 * t0.re[i];
      work_.im[i] -= e0 * t0.im[i];
    }
    double last = scale_into(work_, w, terms_[1]);
    double prev = norm2;
    int k = 1;
    while (!(last <= stop2 && prev <= 1e4 * stop2)) {
      if (k == max_terms || last > 1e12 * norm2) return false;
      h_->apply(terms_[k], work_, e0);
      ++k;
      prev = last;
      last = scale_into(work_, w / k, terms_[k]);
    }
    count_ = k + 1;
    return true;
  }

  int terms() const { return count_; }
  double step() const { return w_; }

  /// psi(s) for s in [0, step()], Horner in s / step().
  void evaluate(double s, Vector& out) {
    const double theta = s / w_;
    const int n = h_->dim();
    acc_ = terms_[count_ - 1];
    double* __restrict ar = acc_.re.data();
    double* __restrict ai = acc_.im.data();
    for (int k = count_ - 2; k >= 0; --k) {
      const double* __restrict tr = terms_[k].re.data();
      const double* __restrict ti = terms_[k].im.data();
      for (int i = 0; i < n; ++i) {
        ar[i] = theta * ar[i] + tr[i];
        ai[i] = theta * ai[i] + ti[i];
      }
    }
    acc_.store(out);
  }

private:
  // dst = -i * f * src, returns |dst|^2
  static double scale_into(const SplitVector& src, double f, SplitVector& dst) {
    const std::size_t n = src.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dst.re[i] = f * src.im[i];
      dst.im[i] = -f * src.re[i];
      s += dst.re[i] * dst.re[i] + dst.im[i] * dst.im[i];
    }
    return s;
  }

  const BandedOperator* h_;
  double tol_;
  double w_ = 0.0;
  int count_ = 0;
  std::vector<SplitVector> terms_;
  SplitVector work_, acc_;
};

}  // namespace pbb

#endif  // PBB_PROPAGATOR_HPP
