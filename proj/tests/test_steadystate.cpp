#include <gtest/gtest.h>

#include <sstream>

#include "pbb/steadystate.hpp"

using namespace pbb;

namespace {

double q_of(const DensityMatrix& rho) {
  const auto p = photon_distribution(rho);
  double n = 0.0, n2 = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    n += k * p[k];
    n2 += double(k) * k * p[k];
  }
  return (n2 - n * n - n) / n;
}

void expect_physical(const DensityMatrix& rho) {
  const DenseMatrix& m = rho.matrix();
  EXPECT_LT((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(m.trace().real(), 1.0, 1e-10);
  EXPECT_NEAR(m.trace().imag(), 0.0, 1e-10);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(m, Eigen::EigenvaluesOnly);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
}

// Coherent-state amplitude of the driven damped empty cavity.
cplx empty_cavity_field(const ModelParams& p) { return p.eta / cplx(p.kappa, -p.delta); }

}  // namespace

TEST(Liouvillian, VacuumIsDarkUnderPureDecay) {
  ModelParams p{1.0, 0.0, 0.0, 0.0, 0.0, 6};
  const Superoperator l = build_liouvillian(p);
  const Vector rho0 = vectorize(DensityMatrix::pure(StateVector::basis(Atom::ground, 0, 6)).matrix());
  EXPECT_LT((l.matrix * rho0).norm(), 1e-15);
}

TEST(Liouvillian, PreservesTraceForRandomParameters) {
  for (int k = 0; k < 6; ++k) {
    ModelParams p{1.0, 0.03 * k, 4.0 + 3.0 * k, -1.0 - k, 0.5 + 0.4 * k, 6 + k};
    const Superoperator l = build_liouvillian(p);
    const Vector id = vectorize(DenseMatrix::Identity(p.dim(), p.dim()));
    const SparseMatrix ladj = l.matrix.adjoint();
    EXPECT_LT((ladj * id).norm(), 1e-10) << k;
  }
}

TEST(Liouvillian, RejectsLargeCutoff) {
  ModelParams p{1.0, 0.0, 10.0, -5.0, 2.5, max_oracle_cutoff + 1};
  EXPECT_THROW(build_liouvillian(p), SteadyStateError);
}

TEST(SteadyState, EmptyCavityIsCoherent) {
  // gamma > 0 keeps the decoupled atom from adding a second null vector
  for (double delta : {0.0, -1.0, -5.0}) {
    for (double eta : {0.5, 1.0, 2.0, 3.0}) {
      ModelParams p{1.0, 0.1, 0.0, delta, eta, 0};
      const double n = std::norm(empty_cavity_field(p));
      p.cutoff = int(std::ceil(n + 10.0 * std::sqrt(n) + 10.0));
      const DensityMatrix rho = steady_state(p);
      expect_physical(rho);
      const auto ops = build_operators(p.cutoff);
      EXPECT_LT(std::abs(expectation(rho, ops.a) - empty_cavity_field(p)), 1e-8)
          << "delta=" << delta << " eta=" << eta;
      EXPECT_NEAR(q_of(rho), 0.0, 1e-8);
    }
  }
}

TEST(SteadyState, EmptyCavityPhotonNumbers) {
  ModelParams p{1.0, 0.1, 0.0, 0.0, 1.0, 20};
  const auto ops = build_operators(p.cutoff);
  EXPECT_NEAR(expectation(steady_state(p), ops.number).real(), 1.0, 1e-9);
  p.delta = -5.0;
  p.eta = 2.0;
  EXPECT_NEAR(expectation(steady_state(p), ops.number).real(), 4.0 / 26.0, 1e-9);
}

TEST(SteadyState, PoissonDistributionAtOnePhoton) {
  ModelParams p{1.0, 0.1, 0.0, 0.0, 1.0, 25};
  const auto pn = photon_distribution(steady_state(p));
  double fact = 1.0;
  for (int n = 0; n <= 12; ++n) {
    if (n > 0) fact *= n;
    EXPECT_NEAR(pn[n], std::exp(-1.0) / fact, 1e-10) << n;
  }
}

TEST(SteadyState, UndrivenRelaxesToGround) {
  ModelParams p{1.0, 0.0, 10.0, -5.0, 0.0, 8};
  const DensityMatrix rho = steady_state(p);
  const DensityMatrix ground = DensityMatrix::pure(StateVector::basis(Atom::ground, 0, 8));
  EXPECT_LT(trace_distance(rho, ground), 1e-9);
  const auto pn = photon_distribution(ground);
  EXPECT_EQ(pn[0], 1.0);
  EXPECT_EQ(expectation(ground, build_operators(8).number), cplx(0.0));
}

TEST(SteadyState, DecoupledUndampedAtomIsDegenerate) {
  ModelParams p{1.0, 0.0, 0.0, 0.0, 2.0, 20};
  EXPECT_THROW(steady_state(p), SteadyStateError);
}

TEST(SteadyState, PhysicalAndStationaryAcrossParameters) {
  const ModelParams cases[] = {{1.0, 0.0, 10.0, -5.0, 2.5, 40},
                               {1.0, 0.01, 20.0, -5.0, 4.0, 30},
                               {1.0, 0.5, 5.0, -1.0, 1.5, 25},
                               {1.0, 0.0, 3.0, 2.0, 1.0, 20}};
  for (const auto& p : cases) {
    const Superoperator l = build_liouvillian(p);
    const DensityMatrix rho = steady_state(l);
    expect_physical(rho);
    EXPECT_LT((l.matrix * vectorize(rho.matrix())).norm(), 1e-9);
    const auto ops = build_operators(p.cutoff);
    EXPECT_LT(std::abs(expectation(rho, ops.number).imag()), 1e-12);
    EXPECT_LT(std::abs(expectation(rho, ops.atom_excitation).imag()), 1e-12);
  }
}

TEST(SteadyState, GaugeCovarianceUnderDrivePhase) {
  // eta -> eta e^{i phi} is undone by rotating the excitation number by phi.
  ModelParams p{1.0, 0.02, 10.0, -5.0, 2.5, 30};
  const double phi = 0.7;
  const auto ops = build_operators(p.cutoff);
  ModelParams undriven = p;
  undriven.eta = 0.0;
  const cplx e = p.eta * std::exp(I * phi);
  const SparseMatrix h = build_hamiltonian(undriven).matrix +
                         I * (e * ops.a_dagger.matrix - std::conj(e) * ops.a.matrix);
  const DensityMatrix rotated = steady_state(build_liouvillian(h, p));
  const DensityMatrix rho = steady_state(p);
  Eigen::VectorXcd u(p.dim());
  for (int i = 0; i < p.dim(); ++i)
    u(i) = std::exp(I * phi * double(photon_of(i) + (atom_of(i) == Atom::excited ? 1 : 0)));
  const DensityMatrix expected(u.asDiagonal() * rho.matrix() * u.conjugate().asDiagonal());
  EXPECT_LT(trace_distance(rotated, expected), 1e-9);
  EXPECT_GT(trace_distance(rotated, rho), 1e-3);  // the rotation is not trivial
}

TEST(SteadyState, SmallGWorkpointReport) {
  ModelParams p{1.0, 0.0, 10.0, -5.0, 2.5, 40};
  const auto pn = photon_distribution(steady_state(p));
  // the vacuum dominates and the tail is bounded well inside the cutoff
  EXPECT_GT(pn[0], pn[1]);
  EXPECT_LT(pn.back(), 1e-8);
  std::ostringstream os;
  write_photon_distribution_csv(os, pn);
  EXPECT_EQ(os.str().substr(0, 6), "n,p_n\n");
  std::cout << "p(n) at g=10, delta=-5, eta=2.5:";
  for (int n = 0; n <= 8; ++n) std::cout << ' ' << pn[n];
  std::cout << '\n';
}

TEST(SteadyState, ExpectationChecksDimensions) {
  const DensityMatrix rho = DensityMatrix::pure(StateVector::basis(Atom::ground, 0, 4));
  EXPECT_THROW(expectation(rho, build_operators(5).number), SteadyStateError);
}
