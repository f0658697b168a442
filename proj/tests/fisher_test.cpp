#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "qmetro/fisher.hpp"
#include "qmetro/linalg.hpp"
#include "qmetro/measurement.hpp"
#include "qmetro/quantum_core.hpp"

using namespace qmetro;
using std::numbers::pi;

namespace {

double max_abs(const ComplexMatrix& a) { return a.cwiseAbs().maxCoeff(); }

double h_phi(double d) { return std::exp(-2 * d * d); }
double h_delta(double d) {
  const double e = std::exp(-2 * d * d);
  return 4 * d * d * e / (1 - e);
}

StateWithDerivatives pd(double phi, double delta, double xi = 0.0) {
  const std::vector<double> p{phi, delta};
  return single_copy_probe(FamilyKind::PhaseDephasing, xi, p);
}

// Residual of 2 d rho = L rho + rho L, projected onto the support of rho.
double sld_residual(const StateWithDerivatives& swd, const SldSet& slds) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(swd.state.matrix());
  const auto& vals = es.eigenvalues();
  ComplexMatrix proj = ComplexMatrix::Zero(swd.dim(), swd.dim());
  for (int i = 0; i < swd.dim(); ++i) {
    if (vals(i) > 1e-12 * vals.maxCoeff()) {
      proj += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
    }
  }
  double worst = 0;
  const ComplexMatrix& rho = swd.state.matrix();
  for (int i = 0; i < swd.num_parameters(); ++i) {
    const ComplexMatrix& l = slds.operators[i];
    const ComplexMatrix r = 2 * swd.derivatives[i] - l * rho - rho * l;
    worst = std::max(worst, max_abs(proj * r * proj));
  }
  return worst;
}

}  // namespace

TEST(Sld, ZeroMean) {
  for (double delta : {0.1, 0.7, 1.9}) {
    const auto swd = pd(0.4, delta, 0.3);
    const auto slds = sld_operators(swd);
    for (const auto& l : slds.operators) {
      EXPECT_LT(std::abs((swd.state.matrix() * l).trace()), 1e-9);
      EXPECT_LT(hermiticity_violation(l), 1e-9);
    }
  }
}

TEST(Sld, PureStateIdentity) {
  const auto swd = pd(0.9, 0.0);
  const auto slds = sld_operators(swd);
  // For rank-1 rho, L = 2 d rho solves the defining equation.
  const ComplexMatrix l = 2 * swd.derivatives[0];
  const ComplexMatrix& rho = swd.state.matrix();
  EXPECT_LT(max_abs(l * rho + rho * l - 2 * swd.derivatives[0]), 1e-12);
  EXPECT_LT(max_abs(slds.operators[0] - l), 1e-7);
}

TEST(Sld, MaximallyMixed) {
  StateWithDerivatives swd{DensityMatrix(ComplexMatrix::Identity(2, 2) / 2.0),
                           {pauli_z() / 2.0}};
  const auto slds = sld_operators(swd);
  EXPECT_LT(max_abs(slds.operators[0] - pauli_z()), 1e-14);
}

TEST(Sld, DefiningEquationResidual) {
  for (double delta = 0.0; delta <= 3.0; delta += 0.15) {
    for (int copies : {1, 2}) {
      for (auto kind : {FamilyKind::PhaseDephasing, FamilyKind::TwoPhase}) {
        ProbeFamily fam{kind, std::vector<double>(copies, 0.6)};
        const std::vector<double> p{0.3, kind == FamilyKind::PhaseDephasing ? delta : delta - 1.0};
        const auto swd = probe_with_derivatives(fam, p);
        EXPECT_LT(sld_residual(swd, sld_operators(swd)), 1e-7) << delta;
      }
    }
  }
}

TEST(Sld, RejectsNonHermitianDerivative) {
  StateWithDerivatives swd{DensityMatrix(ComplexMatrix::Identity(2, 2) / 2.0),
                           {kI * pauli_z()}};
  EXPECT_THROW(sld_operators(swd), std::invalid_argument);
}

TEST(Qfi, ClosedFormsSingleCopy) {
  for (double delta : {0.2, 0.5, 1.0}) {
    const auto swd = pd(1.1, delta, 0.5);
    const RealMatrix h = qfi_matrix(swd, sld_operators(swd));
    EXPECT_NEAR(h(0, 0) / h_phi(delta), 1.0, 1e-6);
    EXPECT_NEAR(h(1, 1) / h_delta(delta), 1.0, 1e-6);
    EXPECT_NEAR(h(0, 1), 0.0, 1e-10);
    EXPECT_EQ(h(0, 1), h(1, 0));
  }
}

TEST(Qfi, ClosedFormsWholeRange) {
  for (int i = 0; i < 50; ++i) {
    const double delta = 0.05 + (3.0 - 0.05) * i / 49.0;
    const auto swd = pd(0.3, delta);
    const RealMatrix h = qfi_matrix(swd, sld_operators(swd));
    EXPECT_NEAR(h(0, 0) / h_phi(delta), 1.0, 1e-6) << delta;
    EXPECT_NEAR(h(1, 1) / h_delta(delta), 1.0, 1e-6) << delta;
  }
}

TEST(Qfi, AdditiveOverCopies) {
  for (auto kind : {FamilyKind::PhaseDephasing, FamilyKind::TwoPhase}) {
    const std::vector<double> p{0.7, 0.4};
    const auto one = single_copy_probe(kind, 0.2, p);
    const auto two = probe_with_derivatives(ProbeFamily{kind, {0.2, 0.2}}, p);
    const RealMatrix h1 = qfi_matrix(one, sld_operators(one));
    const RealMatrix h2 = qfi_matrix(two, sld_operators(two));
    EXPECT_LT((h2 - 2 * h1).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Qfi, PositiveSemidefinite) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 30; ++t) {
    const std::vector<double> p{u(rng), u(rng)};
    const auto swd = probe_with_derivatives(ProbeFamily::two_phase({u(rng), u(rng)}), p);
    const RealMatrix h = qfi_matrix(swd, sld_operators(swd));
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<RealMatrix>(h).eigenvalues().minCoeff(), -1e-9);
  }
}

TEST(WeakCommutativity, PhaseDephasingVanishes) {
  for (double xi : {0.0, 1.0, 4.0}) {
    for (double delta : {0.05, 0.8, 2.5}) {
      const auto swd = pd(2.0, delta, xi);
      EXPECT_LT(std::abs(weak_commutativity(swd, sld_operators(swd), 0, 1)), 1e-8);
    }
  }
}

TEST(WeakCommutativity, TwoPhaseGenericNonzero) {
  const std::vector<double> p{0.4, 0.7};
  const auto swd = single_copy_probe(FamilyKind::TwoPhase, 0.3, p);
  EXPECT_GT(std::abs(weak_commutativity(swd, sld_operators(swd), 0, 1)), 1e-3);
}

TEST(WeakCommutativity, SelfPairIsZeroAndAntisymmetric) {
  const std::vector<double> p{0.4, 0.7};
  const auto swd = single_copy_probe(FamilyKind::TwoPhase, 1.3, p);
  const auto slds = sld_operators(swd);
  EXPECT_EQ(weak_commutativity(swd, slds, 1, 1), 0.0);
  EXPECT_NEAR(weak_commutativity(swd, slds, 0, 1), -weak_commutativity(swd, slds, 1, 0), 1e-12);
}

TEST(WeakCommutativity, CommutingPhaseMakesQfiSingular) {
  for (auto [py, pz] : {std::pair{0.4, 0.7}, std::pair{-1.2, 0.3}, std::pair{0.9, -2.0}}) {
    const auto root = find_commuting_phase(py, pz);
    ASSERT_TRUE(root.has_value());
    const std::vector<double> p{py, pz};
    const auto swd = single_copy_probe(FamilyKind::TwoPhase, *root, p);
    const auto slds = sld_operators(swd);
    EXPECT_LT(std::abs(weak_commutativity(swd, slds, 0, 1)), 1e-8);
    EXPECT_LT(std::abs(qfi_matrix(swd, slds).determinant()), 1e-8);
  }
}

TEST(Probabilities, BellOnPhiPlus) {
  ComplexVector v = ComplexVector::Zero(4);
  v(0) = v(3) = 1 / std::sqrt(2.0);
  StateWithDerivatives swd{DensityMatrix::from_pure(v), {}};
  const auto probs = measurement_probabilities(swd, bell_povm());
  EXPECT_NEAR(probs.probabilities(0), 1.0, 1e-15);
  EXPECT_NEAR(probs.probabilities.tail(3).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Probabilities, MaximallyMixed) {
  StateWithDerivatives swd{DensityMatrix(ComplexMatrix::Identity(4, 4) / 4.0), {}};
  const Povm g = cs_gate_povm({1.0, 0.5, 0.7, false}).povm;
  const auto probs = measurement_probabilities(swd, g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_NEAR(probs.probabilities(k), g[k].element.trace().real() / 4, 1e-15);
  }
}

TEST(Probabilities, DerivativesMatchFiniteDifferences) {
  const Povm g = cs_gate_povm({1.0, 1 / std::sqrt(3.0), 0.85, true}).povm;
  for (auto kind : {FamilyKind::PhaseDephasing, FamilyKind::TwoPhase}) {
    ProbeFamily fam{kind, {0.1, 0.5}};
    const std::vector<double> p{0.8, 0.6};
    const auto probs = measurement_probabilities(probe_with_derivatives(fam, p), g);
    EXPECT_LT(probs.derivatives.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i) {
      auto up = p, dn = p;
      up[i] += h;
      dn[i] -= h;
      const RealVector fd = (measurement_probabilities(probe_with_derivatives(fam, up), g).probabilities -
                             measurement_probabilities(probe_with_derivatives(fam, dn), g).probabilities) /
                            (2 * h);
      for (int k = 0; k < fd.size(); ++k) {
        EXPECT_NEAR(probs.derivatives(i, k), fd(k), 1e-5 * std::max(1.0, std::abs(fd(k))));
      }
    }
  }
}

TEST(Probabilities, DimensionMismatch) {
  EXPECT_THROW(measurement_probabilities(pd(0.1, 0.2), bell_povm()), std::invalid_argument);
}

TEST(ClassicalFi, UniformPattern) {
  OutcomeProbabilities probs;
  probs.labels = {"a", "b", "c", "d"};
  probs.probabilities = RealVector::Constant(4, 0.25);
  probs.derivatives = RealMatrix(2, 4);
  const double a = 0.1, b = 0.05;
  probs.derivatives << a, -a, a, -a, b, b, -b, -b;
  const FisherReport r = classical_fi(probs);
  EXPECT_NEAR(r.classical_fi(0, 0), 16 * a * a, 1e-14);
  EXPECT_NEAR(r.classical_fi(1, 1), 16 * b * b, 1e-14);
  EXPECT_NEAR(r.classical_fi(0, 1), 0.0, 1e-14);
  EXPECT_FALSE(r.singular);
  EXPECT_NEAR(r.effective_fi(0), 16 * a * a, 1e-14);
}

TEST(ClassicalFi, EffectiveFiFromInverse) {
  OutcomeProbabilities probs;
  probs.labels = {"a", "b", "c"};
  probs.probabilities = RealVector(3);
  probs.probabilities << 0.5, 0.3, 0.2;
  probs.derivatives = RealMatrix(2, 3);
  probs.derivatives << 0.2, -0.1, -0.1, 0.05, 0.1, -0.15;
  const FisherReport r = classical_fi(probs);
  const RealMatrix inv = r.classical_fi.inverse();
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(r.effective_fi(j), 1 / inv(j, j), 1e-9);
    EXPECT_LE(r.effective_fi(j), r.classical_fi(j, j) + 1e-9);
  }
}

TEST(ClassicalFi, SingleParameter) {
  OutcomeProbabilities probs;
  probs.labels = {"a", "b"};
  probs.probabilities = RealVector(2);
  probs.probabilities << 0.7, 0.3;
  probs.derivatives = RealMatrix(1, 2);
  probs.derivatives << 0.2, -0.2;
  const FisherReport r = classical_fi(probs);
  EXPECT_NEAR(r.effective_fi(0), r.classical_fi(0, 0), 1e-15);
}

TEST(ClassicalFi, SingularMatrixGivesZeroEffective) {
  OutcomeProbabilities probs;
  probs.labels = {"a", "b"};
  probs.probabilities = RealVector::Constant(2, 0.5);
  probs.derivatives = RealMatrix(3, 2);
  probs.derivatives << 0.3, -0.3, 0.1, -0.1, 0.0, 0.0;
  const FisherReport r = classical_fi(probs);
  EXPECT_TRUE(r.singular);
  EXPECT_EQ(r.effective_fi(0), 0.0);
  EXPECT_EQ(r.effective_fi(1), 0.0);
}

TEST(ClassicalFi, DroppedAndBoundary) {
  OutcomeProbabilities probs;
  probs.labels = {"a", "b", "c"};
  probs.probabilities = RealVector(3);
  probs.probabilities << 0.6, 0.4, 0.0;
  probs.derivatives = RealMatrix(1, 3);
  probs.derivatives << 0.1, -0.1, 0.0;
  FisherReport r = classical_fi(probs);
  EXPECT_EQ(r.dropped_outcomes, std::vector<std::string>{"c"});
  EXPECT_FALSE(r.boundary);
  probs.derivatives << 0.1, -0.2, 0.1;
  r = classical_fi(probs);
  EXPECT_TRUE(r.boundary);
  EXPECT_TRUE(std::isfinite(r.classical_fi(0, 0)));
}

TEST(ClassicalFi, RejectsNegativeProbability) {
  OutcomeProbabilities probs;
  probs.labels = {"a", "b"};
  probs.probabilities = RealVector(2);
  probs.probabilities << 1.1, -0.1;
  probs.derivatives = RealMatrix::Zero(1, 2);
  EXPECT_THROW(classical_fi(probs), std::invalid_argument);
}

// Brute-force scan of single-qubit analysis bases for phi alone.
TEST(ClassicalFi, OptimalPhaseMeasurementSaturatesQfi) {
  for (double delta : {0.3, 0.9}) {
    auto swd = pd(0.5, delta, 0.2);
    swd.derivatives.resize(1);
    double best = 0;
    for (int a = 0; a < 720; ++a) {
      const auto probs =
          measurement_probabilities(swd, single_qubit_projective_povm({pi / 2, a * pi / 360}));
      best = std::max(best, classical_fi(probs).effective_fi(0));
    }
    EXPECT_NEAR(best, h_phi(delta), 1e-4);
    EXPECT_LE(best, h_phi(delta) + 1e-9);
  }
}

TEST(ClassicalFi, QuantumCramerRaoDominance) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 2 * pi);
  for (int t = 0; t < 40; ++t) {
    const auto kind = t % 2 ? FamilyKind::TwoPhase : FamilyKind::PhaseDephasing;
    ProbeFamily fam{kind, {u(rng), u(rng)}};
    const std::vector<double> p{u(rng), u(rng) / 4};
    const auto swd = probe_with_derivatives(fam, p);
    const RealMatrix h = qfi_matrix(swd, sld_operators(swd));
    const Povm povm = t % 3 ? product_projective_povm({u(rng), u(rng)}, {u(rng), u(rng)})
                            : cs_gate_povm({1, 1 / std::sqrt(3.0), u(rng) / (2 * pi), false}).povm;
    const FisherReport r = classical_fi(measurement_probabilities(swd, povm));
    const RealMatrix gap = h - r.classical_fi;
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<RealMatrix>(gap).eigenvalues().minCoeff(), -1e-7);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<RealMatrix>(r.classical_fi).eigenvalues().minCoeff(),
              -1e-9);
  }
}

TEST(Kappa, SaturatedIsParameterCount) {
  FisherReport r;
  r.classical_fi = RealMatrix::Identity(2, 2);
  r.effective_fi = RealVector(2);
  r.effective_fi << 0.8, 0.3;
  const std::vector<double> h{0.8, 0.3};
  const KappaResult k = kappa(r, h, 1);
  EXPECT_NEAR(k.kappa, 2.0, 1e-15);
  EXPECT_FALSE(k.partial);
}

TEST(Kappa, CopiesDivideFisher) {
  FisherReport r;
  r.effective_fi = RealVector(2);
  r.effective_fi << 1.0, 0.5;
  const std::vector<double> h{1.0, 1.0};
  const KappaResult k = kappa(r, h, 2);
  EXPECT_NEAR(k.per_parameter[0], 0.5, 1e-15);
  EXPECT_NEAR(k.per_parameter[1], 0.25, 1e-15);
  EXPECT_NEAR(k.kappa, k.per_parameter[0] + k.per_parameter[1], 1e-12);
}

TEST(Kappa, NonPositiveQfiIsExcluded) {
  FisherReport r;
  r.effective_fi = RealVector(2);
  r.effective_fi << 1.0, 0.5;
  const std::vector<double> h{1.0, 0.0};
  const KappaResult k = kappa(r, h, 1);
  EXPECT_TRUE(k.partial);
  EXPECT_EQ(k.excluded, std::vector<int>{1});
  EXPECT_NEAR(k.kappa, 1.0, 1e-15);
}

TEST(Kappa, BellTwoCopiesBeatsOne) {
  const std::vector<double> p{3 * pi / 4, 0.3};
  const auto ev = evaluate_kappa(ProbeFamily::phase_dephasing({0.0, 0.0}), p, bell_povm());
  EXPECT_GT(ev.kappa.kappa, 1.0);
  EXPECT_LE(ev.kappa.kappa, 1.5 + 1e-9);
}

// Two-phase copies share their input phase; for phase-dephasing the QFI does
// not depend on it, so the copies may differ.
TEST(Kappa, ProductMeasurementsRespectSingleCopyBound) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 2 * pi);
  for (int t = 0; t < 200; ++t) {
    const auto kind = t % 2 ? FamilyKind::TwoPhase : FamilyKind::PhaseDephasing;
    const std::vector<double> p{u(rng), 0.05 + u(rng) / 4};
    const Povm povm = product_projective_povm({u(rng), u(rng)}, {u(rng), u(rng)});
    const double xi1 = u(rng);
    const double xi2 = kind == FamilyKind::TwoPhase ? xi1 : u(rng);
    const auto ev = evaluate_kappa(ProbeFamily{kind, {xi1, xi2}}, p, povm);
    EXPECT_LE(ev.kappa.kappa, 1.0 + 1e-9);
    for (double c : ev.kappa.per_parameter) EXPECT_GE(c, -1e-9);
  }
}

TEST(Kappa, SingleCopyQfiDiagonalAveragesUnequalPhases) {
  const std::vector<double> p{0.3, -0.6};
  ProbeFamily fam = ProbeFamily::two_phase({0.1, 1.4});
  const auto diag = single_copy_qfi_diagonal(fam, p);
  const auto swd = probe_with_derivatives(fam, p);
  const RealMatrix h = qfi_matrix(swd, sld_operators(swd));
  EXPECT_NEAR(2 * diag[0], h(0, 0), 1e-8);
  EXPECT_NEAR(2 * diag[1], h(1, 1), 1e-8);
}
