#ifndef PBB_MODEL_HPP
#define PBB_MODEL_HPP

// Driven-dissipative Jaynes-Cummings model in the frame rotating at the
// drive frequency, with the atom resonant with the cavity mode:
//
//   H = -delta (a^+ a + s^+ s) + i g (a^+ s - s^+ a) + i eta (a^+ - a)
//
// Dissipation enters through the jump operators sqrt(2 kappa) a and
// sqrt(2 gamma) s. Basis ordering is (g,0),(e,0),(g,1),(e,1),...

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace pbb {

using cplx = std::complex<double>;
using Vector = Eigen::VectorXcd;
using DenseMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<cplx>;

inline constexpr cplx I{0.0, 1.0};

class ModelError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct ModelParams {
  double kappa = 1.0;
  double gamma = 0.0;
  double g = 0.0;
  double delta = 0.0;
  double eta = 0.0;
  int cutoff = 1;

  int dim() const { return 2 * (cutoff + 1); }

  void validate() const {
    if (!(kappa > 0.0)) throw ModelError("kappa must be positive");
    if (!(gamma >= 0.0)) throw ModelError("gamma must be non-negative");
    if (!(g >= 0.0)) throw ModelError("g must be non-negative");
    if (!(eta >= 0.0)) throw ModelError("eta must be non-negative");
    if (!std::isfinite(delta)) throw ModelError("delta must be finite");
    if (cutoff < 1) throw ModelError("cutoff must be at least 1");
  }

  bool operator==(const ModelParams&) const = default;
};

enum class Atom : int { ground = 0, excited = 1 };

inline int basis_index(Atom atom, int n) { return 2 * n + static_cast<int>(atom); }
inline int photon_of(int index) { return index / 2; }
inline Atom atom_of(int index) { return static_cast<Atom>(index % 2); }

/// Normalized complex amplitude vector on atom (x) Fock space.
class StateVector {
public:
  StateVector() = default;
  StateVector(Vector amplitudes, int cutoff) : amps_(std::move(amplitudes)), cutoff_(cutoff) {
    if (amps_.size() != 2 * (cutoff + 1)) throw ModelError("state dimension does not match cutoff");
  }

  static StateVector basis(Atom atom, int n, int cutoff) {
    if (n < 0 || n > cutoff) throw ModelError("photon number outside the truncated space");
    Vector v = Vector::Zero(2 * (cutoff + 1));
    v(basis_index(atom, n)) = 1.0;
    return {std::move(v), cutoff};
  }

  /// Coherent field amplitude alpha on the Fock basis with the atom in g.
  /// Built from the Poisson recursion, then renormalized on the truncated space.
  static StateVector coherent(cplx alpha, int cutoff) {
    Vector v = Vector::Zero(2 * (cutoff + 1));
    cplx c = std::exp(-0.5 * std::norm(alpha));
    for (int n = 0; n <= cutoff; ++n) {
      v(basis_index(Atom::ground, n)) = c;
      c *= alpha / std::sqrt(double(n + 1));
    }
    v.normalize();
    return {std::move(v), cutoff};
  }

  const Vector& amplitudes() const { return amps_; }
  int cutoff() const { return cutoff_; }
  int dim() const { return static_cast<int>(amps_.size()); }
  cplx amplitude(Atom atom, int n) const { return amps_(basis_index(atom, n)); }
  double norm() const { return amps_.norm(); }
  bool is_normalized(double tol = 1e-9) const { return std::abs(amps_.norm() - 1.0) < tol; }

private:
  Vector amps_;
  int cutoff_ = 0;
};

enum class OperatorRole {
  a,
  a_dagger,
  sigma,
  sigma_dagger,
  number,
  atom_excitation,
  hamiltonian,
  effective_hamiltonian
};

struct OperatorMatrix {
  OperatorRole role;
  SparseMatrix matrix;

  int dim() const { return static_cast<int>(matrix.rows()); }
  DenseMatrix dense() const { return DenseMatrix(matrix); }
};

struct OperatorSet {
  OperatorMatrix a, a_dagger, sigma, sigma_dagger, number, atom_excitation;
};

namespace detail {

inline SparseMatrix from_triplets(int dim, const std::vector<Eigen::Triplet<cplx>>& t) {
  SparseMatrix m(dim, dim);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

inline SparseMatrix adjoint(const SparseMatrix& m) {
  SparseMatrix r = m.adjoint();
  r.makeCompressed();
  return r;
}

}  // namespace detail

/// Ladder, atomic and number operators on the truncated product space.
/// a^+ drops whatever would land above the cutoff.
inline OperatorSet build_operators(int cutoff) {
  if (cutoff < 1) throw ModelError("cutoff must be at least 1");
  const int dim = 2 * (cutoff + 1);
  std::vector<Eigen::Triplet<cplx>> ta, ts, tn, te;
  for (int n = 0; n <= cutoff; ++n) {
    for (Atom at : {Atom::ground, Atom::excited}) {
      const int col = basis_index(at, n);
      if (n > 0) ta.emplace_back(basis_index(at, n - 1), col, std::sqrt(double(n)));
      if (n > 0) tn.emplace_back(col, col, double(n));
    }
    ts.emplace_back(basis_index(Atom::ground, n), basis_index(Atom::excited, n), 1.0);
    te.emplace_back(basis_index(Atom::excited, n), basis_index(Atom::excited, n), 1.0);
  }
  SparseMatrix a = detail::from_triplets(dim, ta);
  SparseMatrix s = detail::from_triplets(dim, ts);
  return OperatorSet{
      {OperatorRole::a, a},
      {OperatorRole::a_dagger, detail::adjoint(a)},
      {OperatorRole::sigma, s},
      {OperatorRole::sigma_dagger, detail::adjoint(s)},
      {OperatorRole::number, detail::from_triplets(dim, tn)},
      {OperatorRole::atom_excitation, detail::from_triplets(dim, te)},
  };
}

inline OperatorMatrix build_hamiltonian(const ModelParams& p) {
  p.validate();
  const int dim = p.dim();
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(4 * dim);
  for (int n = 0; n <= p.cutoff; ++n) {
    const int gn = basis_index(Atom::ground, n);
    const int en = basis_index(Atom::excited, n);
    // excitation number n for |g,n>, n+1 for |e,n>
    if (p.delta != 0.0) {
      if (n > 0) t.emplace_back(gn, gn, -p.delta * n);
      t.emplace_back(en, en, -p.delta * (n + 1));
    }
    if (n < p.cutoff) {
      const double root = std::sqrt(double(n + 1));
      const int gn1 = basis_index(Atom::ground, n + 1);
      const int en1 = basis_index(Atom::excited, n + 1);
      if (p.g != 0.0) {
        // i g a^+ s : |e,n> -> sqrt(n+1) |g,n+1>
        t.emplace_back(gn1, en, I * p.g * root);
        t.emplace_back(en, gn1, -I * p.g * root);
      }
      if (p.eta != 0.0) {
        t.emplace_back(gn1, gn, I * p.eta * root);
        t.emplace_back(gn, gn1, -I * p.eta * root);
        t.emplace_back(en1, en, I * p.eta * root);
        t.emplace_back(en, en1, -I * p.eta * root);
      }
    }
  }
  return {OperatorRole::hamiltonian, detail::from_triplets(dim, t)};
}

/// H - i kappa a^+a - i gamma s^+s, the no-jump drift of the unraveling.
inline OperatorMatrix build_effective_hamiltonian(const ModelParams& p) {
  OperatorMatrix h = build_hamiltonian(p);
  const int dim = p.dim();
  std::vector<Eigen::Triplet<cplx>> t;
  for (int i = 0; i < dim; ++i) {
    const double loss = p.kappa * photon_of(i) + (atom_of(i) == Atom::excited ? p.gamma : 0.0);
    if (loss != 0.0) t.emplace_back(i, i, -I * loss);
  }
  SparseMatrix damping = detail::from_triplets(dim, t);
  SparseMatrix heff = h.matrix + damping;
  heff.makeCompressed();
  return {OperatorRole::effective_hamiltonian, std::move(heff)};
}

enum class Ladder { plus, minus };

/// Undriven dressed state |n,+/-> of the rotating-frame Hamiltonian.
///
/// With the i g (a^+ s - s^+ a) coupling the excited component carries a
/// relative phase -/+ i: |n,+/-> = (|g,n> -/+ i |e,n-1>)/sqrt(2), with energy
/// -n delta +/- sqrt(n) g. Moduli are the familiar 1/sqrt(2).
inline StateVector dressed_state(int n, Ladder ladder, int cutoff) {
  if (n < 1 || n > cutoff) throw ModelError("dressed state index out of range");
  Vector v = Vector::Zero(2 * (cutoff + 1));
  const double r = 1.0 / std::sqrt(2.0);
  v(basis_index(Atom::ground, n)) = r;
  v(basis_index(Atom::excited, n - 1)) = (ladder == Ladder::plus ? -I : I) * r;
  return {std::move(v), cutoff};
}

inline double dressed_energy(int n, Ladder ladder, const ModelParams& p) {
  const double split = std::sqrt(double(n)) * p.g;
  return -n * p.delta + (ladder == Ladder::plus ? split : -split);
}

/// Probability that a cavity photon escape from |n,+/-> lands on the other ladder.
inline double ladder_switch_probability(int n) {
  if (n < 1) throw ModelError("ladder switch probability needs n >= 1");
  const double hi = std::sqrt(double(n)) + std::sqrt(double(n - 1));
  const double lo = std::sqrt(double(n)) - std::sqrt(double(n - 1));
  return lo * lo / (hi * hi + lo * lo);
}

/// Ladder-switch probability under an atomic decay from |n,+/->.
inline double atomic_switch_probability() { return 0.5; }

}  // namespace pbb

#endif  // PBB_MODEL_HPP
