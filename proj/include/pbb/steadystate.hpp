#ifndef PBB_STEADYSTATE_HPP
#define PBB_STEADYSTATE_HPP

// Direct stationary solution of the master equation on small cutoffs.
// Density matrices are column-stacked: vec(A rho B) = (B^T (x) A) vec(rho).

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/KroneckerProduct>

#include "pbb/model.hpp"

namespace pbb {

inline constexpr int max_oracle_cutoff = 60;

class SteadyStateError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Trace-one Hermitian positive matrix.
class DensityMatrix {
public:
  DensityMatrix() = default;
  explicit DensityMatrix(DenseMatrix rho) : rho_(std::move(rho)) {}

  static DensityMatrix pure(const StateVector& psi) {
    return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
  }

  const DenseMatrix& matrix() const { return rho_; }
  int dim() const { return static_cast<int>(rho_.rows()); }
  int cutoff() const { return dim() / 2 - 1; }

private:
  DenseMatrix rho_;
};

struct Superoperator {
  SparseMatrix matrix;  // D^2 x D^2
  int dim = 0;          // D
};

namespace detail {

inline SparseMatrix sparse_identity(int n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

inline SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
  SparseMatrix out = Eigen::kroneckerProduct(a, b).eval();
  out.makeCompressed();
  return out;
}

/// rate * (2 L rho L^+ - L^+L rho - rho L^+L)
inline SparseMatrix dissipator(const SparseMatrix& l, double rate, const SparseMatrix& id) {
  const SparseMatrix ldl = SparseMatrix(l.adjoint()) * l;
  const SparseMatrix lconj = l.conjugate();
  const SparseMatrix ldl_t = ldl.transpose();
  SparseMatrix d = 2.0 * kron(lconj, l) - kron(id, ldl) - kron(ldl_t, id);
  return rate * d;
}

}  // namespace detail

/// Liouvillian for an arbitrary Hamiltonian on the model's space, with the
/// cavity and atomic dissipators of `p`.
inline Superoperator build_liouvillian(const SparseMatrix& h, const ModelParams& p) {
  p.validate();
  if (p.cutoff > max_oracle_cutoff)
    throw SteadyStateError("cutoff above the steady-state oracle limit of " +
                           std::to_string(max_oracle_cutoff));
  const int dim = p.dim();
  if (h.rows() != dim) throw SteadyStateError("Hamiltonian dimension mismatch");
  const OperatorSet ops = build_operators(p.cutoff);
  const SparseMatrix id = detail::sparse_identity(dim);
  const SparseMatrix ht = h.transpose();
  SparseMatrix l = (-I) * detail::kron(id, h) + I * detail::kron(ht, id);
  l += detail::dissipator(ops.a.matrix, p.kappa, id);
  if (p.gamma > 0.0) l += detail::dissipator(ops.sigma.matrix, p.gamma, id);
  l.prune(cplx(0.0, 0.0));
  l.makeCompressed();
  return {std::move(l), dim};
}

inline Superoperator build_liouvillian(const ModelParams& p) {
  return build_liouvillian(build_hamiltonian(p).matrix, p);
}

inline Vector vectorize(const DenseMatrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline DenseMatrix unvectorize(const Vector& v, int dim) {
  return Eigen::Map<const DenseMatrix>(v.data(), dim, dim);
}

namespace detail {

inline DenseMatrix normalized_density(const Vector& x, int dim) {
  DenseMatrix rho = unvectorize(x, dim);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const cplx tr = rho.trace();
  if (std::abs(tr) < 1e-300) throw SteadyStateError("null vector has zero trace");
  return rho / tr;
}

}  // namespace detail

/// Null vector of L by shift-invert inverse iteration from two independent
/// start vectors. The results must coincide, otherwise the null space is
/// degenerate and no choice is made.
inline DensityMatrix steady_state(const Superoperator& l) {
  const int dim = l.dim;
  const Eigen::Index n = l.matrix.rows();
  double scale = 1.0;
  for (Eigen::Index k = 0; k < l.matrix.nonZeros(); ++k)
    scale = std::max(scale, std::abs(l.matrix.valuePtr()[k]));
  const double shift = 1e-9 * scale;
  SparseMatrix m = l.matrix;
  for (Eigen::Index i = 0; i < n; ++i) m.coeffRef(i, i) -= shift;
  m.makeCompressed();

  Eigen::SparseLU<SparseMatrix> lu;
  lu.analyzePattern(m);
  lu.factorize(m);
  if (lu.info() != Eigen::Success) throw SteadyStateError("factorization of L - shift failed");

  auto iterate = [&](Vector x) {
    double last = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 20; ++it) {
      x = lu.solve(x);
      if (lu.info() != Eigen::Success) throw SteadyStateError("shift-invert solve failed");
      x /= x.norm();
      const double resid = (l.matrix * x).norm();
      if (resid < 1e-14 * scale || resid > 0.5 * last) {
        if (it >= 2) break;
      }
      last = resid;
    }
    // polish: one more inverse step
    x = lu.solve(x);
    x /= x.norm();
    return x;
  };

  // identity and a fixed pseudo-random Hermitian start
  Vector start1 = vectorize(DenseMatrix::Identity(dim, dim));
  DenseMatrix r(dim, dim);
  std::uint64_t state = 0x2545f4914f6cdd1dULL;
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      const double u = double(state >> 11) * 0x1.0p-53;
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      const double v = double(state >> 11) * 0x1.0p-53;
      r(i, j) = {u - 0.5, v - 0.5};
    }
  DenseMatrix h2 = r * r.adjoint() + DenseMatrix::Identity(dim, dim) * 0.01;
  Vector start2 = vectorize(h2);

  const Vector x1 = iterate(start1);
  const Vector x2 = iterate(start2);
  // x1 and x2 are both unit vectors; parallel iff the null space is 1-D
  const double overlap = std::abs(x1.dot(x2));
  if (overlap < 1.0 - 1e-8)
    throw SteadyStateError("degenerate null space of the Liouvillian (no unique steady state)");

  DenseMatrix rho = detail::normalized_density(x1, dim);
  const double resid = (l.matrix * vectorize(rho)).norm();
  if (!(resid < 1e-9)) throw SteadyStateError("steady-state residual too large");
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-8)
    throw SteadyStateError("steady state is not positive semidefinite");
  return DensityMatrix(std::move(rho));
}

inline DensityMatrix steady_state(const ModelParams& p) { return steady_state(build_liouvillian(p)); }

inline cplx expectation(const DensityMatrix& rho, const OperatorMatrix& op) {
  if (rho.dim() != op.dim()) throw SteadyStateError("dimension mismatch in expectation");
  // Tr(rho op) = sum_ij rho_ij op_ji
  cplx sum = 0.0;
  for (int col = 0; col < op.matrix.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(op.matrix, col); it; ++it)
      sum += rho.matrix()(col, it.row()) * it.value();
  return sum;
}

/// p(n) summed over the atom.
inline std::vector<double> photon_distribution(const DensityMatrix& rho) {
  const int cutoff = rho.cutoff();
  std::vector<double> p(cutoff + 1);
  for (int n = 0; n <= cutoff; ++n) {
    const int g = basis_index(Atom::ground, n), e = basis_index(Atom::excited, n);
    p[n] = rho.matrix()(g, g).real() + rho.matrix()(e, e).real();
  }
  return p;
}

inline void write_photon_distribution_csv(std::ostream& os, const std::vector<double>& p) {
  os << "n,p_n\n";
  char buf[64];
  for (std::size_t n = 0; n < p.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", n, p[n]);
    os << buf;
  }
}

/// Trace distance (1/2)||rho - sigma||_1.
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(a.matrix() - b.matrix(), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace pbb

#endif  // PBB_STEADYSTATE_HPP
