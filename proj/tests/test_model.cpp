#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "pbb/model.hpp"

using namespace pbb;

namespace {

double max_abs(const DenseMatrix& m) { return m.cwiseAbs().maxCoeff(); }

Eigen::Matrix2cd block(const DenseMatrix& h, int i, int j) {
  Eigen::Matrix2cd b;
  b << h(i, i), h(i, j), h(j, i), h(j, j);
  return b;
}

}  // namespace

TEST(Operators, LadderActionAtCutoffOne) {
  const auto ops = build_operators(1);
  const DenseMatrix a = ops.a.dense();
  EXPECT_EQ(a.rows(), 4);
  const Vector g1 = StateVector::basis(Atom::ground, 1, 1).amplitudes();
  const Vector g0 = StateVector::basis(Atom::ground, 0, 1).amplitudes();
  EXPECT_LT((a * g1 - g0).norm(), 1e-15);
  EXPECT_LT((a * g0).norm(), 1e-15);
}

TEST(Operators, NumberEigenvalueOnExcitedThree) {
  const auto ops = build_operators(5);
  const Vector e3 = StateVector::basis(Atom::excited, 3, 5).amplitudes();
  EXPECT_NEAR((e3.adjoint() * ops.number.matrix * e3)(0).real(), 3.0, 1e-15);
}

TEST(Operators, CommutatorIsIdentityBelowTopLevel) {
  const int cutoff = 5;
  const auto ops = build_operators(cutoff);
  const DenseMatrix a = ops.a.dense(), ad = ops.a_dagger.dense();
  const DenseMatrix c = a * ad - ad * a;
  const int low = basis_index(Atom::excited, cutoff - 1) + 1;  // all of n <= cutoff-1
  EXPECT_LT(max_abs(c.topLeftCorner(low, low) - DenseMatrix::Identity(low, low)), 1e-14);
  // truncation shows up only in the top photon level
  EXPECT_GT(max_abs(c.bottomRightCorner(2, 2) - DenseMatrix::Identity(2, 2)), 1.0);
}

TEST(Operators, AdjointPairsAreExact) {
  const auto ops = build_operators(7);
  EXPECT_EQ(max_abs(ops.a_dagger.dense() - ops.a.dense().adjoint()), 0.0);
  EXPECT_EQ(max_abs(ops.sigma_dagger.dense() - ops.sigma.dense().adjoint()), 0.0);
  EXPECT_EQ(ops.a.role, OperatorRole::a);
  EXPECT_EQ(ops.sigma_dagger.role, OperatorRole::sigma_dagger);
}

TEST(Operators, BasisOrderingInterleavesAtom) {
  EXPECT_EQ(basis_index(Atom::ground, 0), 0);
  EXPECT_EQ(basis_index(Atom::excited, 0), 1);
  EXPECT_EQ(basis_index(Atom::ground, 1), 2);
  EXPECT_EQ(basis_index(Atom::excited, 1), 3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(basis_index(atom_of(i), photon_of(i)), i);
}

TEST(Params, DimensionAndValidation) {
  ModelParams p;
  p.cutoff = 9;
  EXPECT_EQ(p.dim(), 20);
  p.cutoff = 0;
  EXPECT_THROW(p.validate(), ModelError);
  p.cutoff = 3;
  p.kappa = 0.0;
  EXPECT_THROW(p.validate(), ModelError);
  p.kappa = 1.0;
  p.gamma = -0.1;
  EXPECT_THROW(p.validate(), ModelError);
  EXPECT_THROW(build_operators(0), ModelError);
}

TEST(States, CoherentAndBasisAreNormalized) {
  EXPECT_TRUE(StateVector::coherent({1.5, -0.7}, 30).is_normalized());
  EXPECT_TRUE(StateVector::basis(Atom::excited, 4, 4).is_normalized());
  EXPECT_THROW(StateVector::basis(Atom::ground, 5, 4), ModelError);
  EXPECT_THROW(StateVector(Vector::Zero(5), 1), ModelError);
}

TEST(Hamiltonian, VanishesWithoutCouplingDriveOrDetuning) {
  ModelParams p{1.0, 0.0, 0.0, 0.0, 0.0, 6};
  EXPECT_EQ(max_abs(build_hamiltonian(p).dense()), 0.0);
}

TEST(Hamiltonian, HermitianForRandomParameters) {
  for (int k = 0; k < 20; ++k) {
    ModelParams p{1.0, 0.01 * k, 3.7 * k, -0.9 * k + 2.0, 0.61 * k, 4 + k};
    const DenseMatrix h = build_hamiltonian(p).dense();
    EXPECT_LT(max_abs(h - h.adjoint()), 1e-12) << "k=" << k;
  }
}

TEST(Hamiltonian, ResonantDoubletIsPlusMinusG) {
  for (double g : {1.0, 13.0, 50.0}) {
    ModelParams p{1.0, 0.0, g, 0.0, 0.0, 4};
    const DenseMatrix h = build_hamiltonian(p).dense();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(
        block(h, basis_index(Atom::ground, 1), basis_index(Atom::excited, 0)));
    EXPECT_NEAR(es.eigenvalues()(0), -g, 1e-12);
    EXPECT_NEAR(es.eigenvalues()(1), g, 1e-12);
  }
}

TEST(Hamiltonian, FourPhotonBlockAtWorkpoint) {
  ModelParams p{1.0, 0.0, 50.0, -5.0, 0.0, 8};
  const DenseMatrix h = build_hamiltonian(p).dense();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(
      block(h, basis_index(Atom::ground, 4), basis_index(Atom::excited, 3)));
  EXPECT_NEAR(es.eigenvalues()(0), -80.0, 1e-11);
  EXPECT_NEAR(es.eigenvalues()(1), 120.0, 1e-11);
}

TEST(EffectiveHamiltonian, DiagonalLossIsKappaN) {
  ModelParams p{1.0, 0.0, 20.0, -3.0, 4.0, 12};
  const DenseMatrix h = build_effective_hamiltonian(p).dense();
  for (int i = 0; i < p.dim(); ++i) EXPECT_NEAR(h(i, i).imag(), -photon_of(i), 1e-14);
}

TEST(EffectiveHamiltonian, AtomicDecayAddsToExcitedStates) {
  ModelParams p{1.0, 0.01, 50.0, -5.0, 12.5, 10};
  const DenseMatrix h = build_effective_hamiltonian(p).dense();
  for (int i = 0; i < p.dim(); ++i) {
    const double extra = atom_of(i) == Atom::excited ? 0.01 : 0.0;
    EXPECT_NEAR(h(i, i).imag(), -photon_of(i) - extra, 1e-14);
  }
  const DenseMatrix herm = build_hamiltonian(p).dense();
  EXPECT_LT(max_abs((h - herm).real()), 1e-15);
}

TEST(EffectiveHamiltonian, UndrivenSpectrumDecays) {
  ModelParams p{1.0, 0.05, 30.0, -5.0, 0.0, 15};
  Eigen::ComplexEigenSolver<DenseMatrix> es(build_effective_hamiltonian(p).dense());
  for (int i = 0; i < es.eigenvalues().size(); ++i) EXPECT_LE(es.eigenvalues()(i).imag(), 1e-10);
}

TEST(Dressed, OneExcitationPlusAmplitudes) {
  const StateVector s = dressed_state(1, Ladder::plus, 3);
  EXPECT_NEAR(std::abs(s.amplitude(Atom::ground, 1)), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(s.amplitude(Atom::excited, 0)), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_TRUE(s.is_normalized());
}

TEST(Dressed, LaddersAreOrthogonal) {
  for (int n = 1; n <= 10; ++n) {
    const Vector p = dressed_state(n, Ladder::plus, 10).amplitudes();
    const Vector m = dressed_state(n, Ladder::minus, 10).amplitudes();
    EXPECT_LT(std::abs(p.dot(m)), 1e-15);
  }
}

TEST(Dressed, DiagonalizeUndrivenHamiltonian) {
  ModelParams p{1.0, 0.0, 50.0, -5.0, 0.0, 25};
  const SparseMatrix h = build_hamiltonian(p).matrix;
  for (int n = 1; n <= p.cutoff - 1; ++n)
    for (Ladder l : {Ladder::plus, Ladder::minus}) {
      const Vector v = dressed_state(n, l, p.cutoff).amplitudes();
      EXPECT_LT((h * v - dressed_energy(n, l, p) * v).norm(), 1e-10) << n;
    }
  // matrix-vector expectation on |n,->
  const Vector v = dressed_state(7, Ladder::minus, p.cutoff).amplitudes();
  EXPECT_NEAR(v.dot(h * v).real(), 35.0 - std::sqrt(7.0) * 50.0, 1e-10);
}

TEST(LadderSwitch, LimitsAndExactValue) {
  EXPECT_DOUBLE_EQ(ladder_switch_probability(1), 0.5);
  // 16 n^2 p = 1 + 1/n + O(1/n^2); at n = 50 the exact value sits 2.03% above 1/(16 n^2)
  EXPECT_NEAR(ladder_switch_probability(50) / 2.5e-5, 1.0, 0.025);
  for (int n = 10; n <= 2000; n += 99)
    EXPECT_NEAR(ladder_switch_probability(n) * 16.0 * n * n, 1.0 + 1.0 / n, 1.0 / (double(n) * n));
  for (int n = 1; n < 500; ++n)
    EXPECT_GT(ladder_switch_probability(n), ladder_switch_probability(n + 1));
  EXPECT_THROW(ladder_switch_probability(0), ModelError);
}

TEST(LadderSwitch, MatchesCavityJumpMatrixElements) {
  // |<n-1,-/+|a|n,+>|^2 normalized over both targets
  const int cutoff = 40;
  const SparseMatrix a = build_operators(cutoff).a.matrix;
  for (int n = 2; n <= 30; ++n) {
    const Vector after = a * dressed_state(n, Ladder::plus, cutoff).amplitudes();
    const double same = std::norm(dressed_state(n - 1, Ladder::plus, cutoff).amplitudes().dot(after));
    const double other = std::norm(dressed_state(n - 1, Ladder::minus, cutoff).amplitudes().dot(after));
    EXPECT_NEAR(other / (same + other), ladder_switch_probability(n), 1e-12);
  }
}

TEST(AtomicSwitch, HalfForEveryN) {
  const int cutoff = 20;
  const SparseMatrix s = build_operators(cutoff).sigma.matrix;
  EXPECT_EQ(atomic_switch_probability(), 0.5);
  for (int n = 1; n <= 15; ++n) {
    const Vector after = s * dressed_state(n, Ladder::plus, cutoff).amplitudes();
    double same = 0.0, other = 0.0;
    if (n >= 2) {
      same = std::norm(dressed_state(n - 1, Ladder::plus, cutoff).amplitudes().dot(after));
      other = std::norm(dressed_state(n - 1, Ladder::minus, cutoff).amplitudes().dot(after));
      EXPECT_NEAR(same, other, 1e-14);
    } else {
      // |1,+> decays to |g,0>, which is on neither ladder
      EXPECT_NEAR(after.norm(), 1.0 / std::sqrt(2.0), 1e-15);
    }
  }
}
