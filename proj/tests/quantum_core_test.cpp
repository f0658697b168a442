#include <cmath>
#include <numbers>
#include <stdexcept>

#include <gtest/gtest.h>

#include "qmetro/linalg.hpp"
#include "qmetro/quantum_core.hpp"

using namespace qmetro;
using std::numbers::pi;

namespace {

double max_abs(const ComplexMatrix& a) { return a.cwiseAbs().maxCoeff(); }

// exp(X) by truncated power series.
ComplexMatrix taylor_exp(const ComplexMatrix& x, int order) {
  ComplexMatrix term = ComplexMatrix::Identity(x.rows(), x.cols());
  ComplexMatrix sum = term;
  for (int k = 1; k <= order; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

}  // namespace

TEST(EquatorialState, PlusState) {
  const DensityMatrix rho = make_equatorial_state(0.0);
  EXPECT_LT(max_abs(rho.matrix() - ComplexMatrix::Constant(2, 2, 0.5)), 1e-15);
}

TEST(EquatorialState, MinusState) {
  const ComplexMatrix m = make_equatorial_state(pi).matrix();
  EXPECT_NEAR(m(0, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(m(1, 1).real(), 0.5, 1e-15);
  EXPECT_NEAR(m(0, 1).real(), -0.5, 1e-15);
  EXPECT_NEAR(m(1, 0).real(), -0.5, 1e-15);
}

TEST(EquatorialState, QuarterTurn) {
  const ComplexMatrix m = make_equatorial_state(pi / 2).matrix();
  EXPECT_LT(std::abs(m(0, 1) - Complex(0, -0.5)), 1e-15);
  EXPECT_LT(std::abs(m(1, 0) - Complex(0, 0.5)), 1e-15);
  EXPECT_NEAR(make_equatorial_state(pi / 2).purity(), 1.0, 1e-14);
}

TEST(EquatorialState, RejectsNonFinite) {
  EXPECT_THROW(make_equatorial_state(std::nan("")), std::invalid_argument);
  EXPECT_THROW(make_equatorial_state(INFINITY), std::invalid_argument);
}

TEST(RotationUnitary, OriginIsIdentity) {
  EXPECT_LT(max_abs(rotation_unitary(0, 0) - ComplexMatrix::Identity(2, 2)), 1e-15);
}

TEST(RotationUnitary, PureZGenerator) {
  const ComplexMatrix u = rotation_unitary(0, pi / 2);
  EXPECT_LT(std::abs(u(0, 0) - std::exp(Complex(0, pi / 2))), 1e-14);
  EXPECT_LT(std::abs(u(1, 1) - std::exp(Complex(0, -pi / 2))), 1e-14);
  EXPECT_LT(std::abs(u(0, 1)), 1e-15);
}

TEST(RotationUnitary, PureYGenerator) {
  // exp(i pi/2 sigma_y) = i sigma_y = [[0, 1], [-1, 0]].
  const ComplexMatrix u = rotation_unitary(pi / 2, 0);
  EXPECT_LT(std::abs(u(0, 1) - 1.0), 1e-14);
  EXPECT_LT(std::abs(u(1, 0) + 1.0), 1e-14);
  EXPECT_LT(std::abs(u(0, 0)), 1e-15);
}

TEST(RotationUnitary, MatchesTaylorSeries) {
  for (double py = -0.7; py <= 0.7; py += 0.1) {
    for (double pz = -0.7; pz <= 0.7; pz += 0.1) {
      if (std::hypot(py, pz) > 1.0) continue;
      const ComplexMatrix gen = kI * (py * pauli_y() + pz * pauli_z());
      EXPECT_LT(max_abs(rotation_unitary(py, pz) - taylor_exp(gen, 12)), 1e-10) << py << " " << pz;
    }
  }
}

TEST(RotationUnitary, SmallAngleBranchIsContinuous) {
  const ComplexMatrix below = rotation_unitary(3e-9, 4e-9);
  const ComplexMatrix above = rotation_unitary(3e-8, 4e-8);
  const ComplexMatrix gen_below = kI * (3e-9 * pauli_y() + 4e-9 * pauli_z());
  const ComplexMatrix gen_above = kI * (3e-8 * pauli_y() + 4e-8 * pauli_z());
  EXPECT_LT(max_abs(below - taylor_exp(gen_below, 4)), 1e-16);
  EXPECT_LT(max_abs(above - taylor_exp(gen_above, 4)), 1e-16);
}

TEST(RotationUnitary, IsUnitary) {
  for (double py : {-3.0, 0.2, 1.7, 10.0}) {
    for (double pz : {-2.5, 0.0, 0.9}) {
      const ComplexMatrix u = rotation_unitary(py, pz);
      EXPECT_LT(max_abs(u.adjoint() * u - ComplexMatrix::Identity(2, 2)), 1e-12);
    }
  }
}

TEST(DephasedState, NoPhaseNoDephasing) {
  EXPECT_LT(max_abs(dephased_phase_state(0, 0, 0).matrix() - make_equatorial_state(0).matrix()),
            1e-15);
}

TEST(DephasedState, FullDephasing) {
  const ComplexMatrix m = dephased_phase_state(0.3, 1.1, 6.0).matrix();
  EXPECT_LT(std::abs(m(0, 1)), 1e-15);
  EXPECT_NEAR(m(0, 0).real(), 0.5, 1e-15);
}

TEST(DephasedState, OffDiagonalValue) {
  const Complex c = dephased_phase_state(0, pi / 2, 1.0).matrix()(0, 1);
  EXPECT_NEAR(std::abs(c), 0.18393972058572117, 1e-12);
  EXPECT_NEAR(std::arg(c), -pi / 2, 1e-12);
}

TEST(DephasedState, NegativeDeltaThrows) {
  EXPECT_THROW(dephased_phase_state(0, 0, -0.1), std::invalid_argument);
}

TEST(DephasedState, PurityFormula) {
  for (double delta = 0.0; delta <= 3.0; delta += 0.25) {
    for (double phi : {-1.0, 0.4, 2.9}) {
      const DensityMatrix rho = dephased_phase_state(0.7, phi, delta);
      EXPECT_NEAR(rho.purity(), (1 + std::exp(-2 * delta * delta)) / 2, 1e-10);
      EXPECT_GE(min_eigenvalue(rho.matrix()), -1e-10);
    }
  }
}

TEST(DensityMatrixInvariants, RejectsInvalidMatrices) {
  ComplexMatrix bad_trace = ComplexMatrix::Identity(2, 2);
  EXPECT_THROW(DensityMatrix{bad_trace}, std::invalid_argument);
  ComplexMatrix non_herm = ComplexMatrix::Identity(2, 2) / 2.0;
  non_herm(0, 1) = 0.1;
  EXPECT_THROW(DensityMatrix{non_herm}, std::invalid_argument);
  ComplexMatrix negative(2, 2);
  negative << 1.2, 0, 0, -0.2;
  EXPECT_THROW(DensityMatrix{negative}, std::invalid_argument);
  EXPECT_THROW(DensityMatrix{ComplexMatrix::Identity(2, 3)}, std::invalid_argument);
}

TEST(TensorProduct, Identities) {
  EXPECT_LT(max_abs(tensor_product(ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(2, 2)) -
                    ComplexMatrix::Identity(4, 4)),
            0.0 + 1e-300);
  ComplexMatrix p0 = ComplexMatrix::Zero(2, 2), p1 = ComplexMatrix::Zero(2, 2);
  p0(0, 0) = 1;
  p1(1, 1) = 1;
  ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
  expected(1, 1) = 1;
  EXPECT_EQ(tensor_product(p0, p1), expected);
}

TEST(TensorProduct, TraceIsMultiplicative) {
  const ComplexMatrix a = dephased_phase_state(0.1, 0.2, 0.3).matrix();
  const ComplexMatrix b = make_equatorial_state(1.4).matrix();
  EXPECT_NEAR(tensor_product(a, b).trace().real(), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(tensor_product(a, b)(1, 2) - a(0, 1) * b(1, 0)), 0.0, 1e-15);
}

TEST(ProbeDerivatives, PhaseDephasingAnalytic) {
  const double phi = 0.8;
  const std::vector<double> params{phi, 0.5};
  const auto swd = probe_with_derivatives(ProbeFamily::phase_dephasing({0.0}), params);
  const Complex expected = -2 * 0.5 * std::exp(Complex(-0.25, -phi)) / 2.0;
  EXPECT_LT(std::abs(swd.derivatives[1](0, 1) - expected), 1e-14);
  EXPECT_LT(std::abs(swd.derivatives[0](0, 1) - Complex(0, -1) * swd.state.matrix()(0, 1)), 1e-14);
}

TEST(ProbeDerivatives, PhaseDephasingMatchesFiniteDifference) {
  const ProbeFamily fam = ProbeFamily::phase_dephasing({0.3, 1.2});
  const std::vector<double> p{0.6, 0.9};
  const auto swd = probe_with_derivatives(fam, p);
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    auto plus = p, minus = p;
    plus[i] += h;
    minus[i] -= h;
    const ComplexMatrix fd = (probe_with_derivatives(fam, plus).state.matrix() -
                              probe_with_derivatives(fam, minus).state.matrix()) /
                             (2 * h);
    EXPECT_LT(max_abs(fd - swd.derivatives[i]), 1e-8);
  }
}

TEST(ProbeDerivatives, TracelessAndHermitian) {
  for (auto kind : {FamilyKind::PhaseDephasing, FamilyKind::TwoPhase}) {
    for (int copies : {1, 2, 3}) {
      ProbeFamily fam{kind, std::vector<double>(copies, 0.4)};
      const std::vector<double> p{0.35, 0.7};
      const auto swd = probe_with_derivatives(fam, p);
      EXPECT_EQ(swd.dim(), 1 << copies);
      ASSERT_EQ(swd.num_parameters(), 2);
      for (const auto& d : swd.derivatives) {
        EXPECT_LT(std::abs(d.trace()), 1e-9);
        EXPECT_LT(hermiticity_violation(d), 1e-10);
      }
    }
  }
}

TEST(ProbeDerivatives, TwoPhaseOriginCommutator) {
  const std::vector<double> p{0.0, 0.0};
  const auto swd = single_copy_probe(FamilyKind::TwoPhase, 0.0, p);
  const ComplexMatrix rho = swd.state.matrix();
  const ComplexMatrix expected = kI * (pauli_z() * rho - rho * pauli_z());
  EXPECT_LT(max_abs(swd.derivatives[1] - expected), 1e-9);
  const ComplexMatrix expected_y = kI * (pauli_y() * rho - rho * pauli_y());
  EXPECT_LT(max_abs(swd.derivatives[0] - expected_y), 1e-9);
}

TEST(ProbeDerivatives, TwoPhaseRichardsonConsistency) {
  for (double xi : {0.0, 1.3, 4.0}) {
    const std::vector<double> p{0.45, -0.8};
    EXPECT_LT(finite_difference_discrepancy(ProbeFamily::two_phase({xi, xi}), p), 1e-6);
  }
  const std::vector<double> p{0.1, 0.2};
  EXPECT_EQ(finite_difference_discrepancy(ProbeFamily::phase_dephasing({0.0}), p), 0.0);
}

TEST(ProbeDerivatives, ProductRuleTwoCopies) {
  const std::vector<double> p{0.3, 0.4};
  const auto one = single_copy_probe(FamilyKind::PhaseDephasing, 0.2, p);
  const auto two = probe_with_derivatives(ProbeFamily::phase_dephasing({0.2, 0.2}), p);
  const ComplexMatrix& r = one.state.matrix();
  for (int i = 0; i < 2; ++i) {
    const ComplexMatrix& d = one.derivatives[i];
    EXPECT_LT(max_abs(two.derivatives[i] - (tensor_product(d, r) + tensor_product(r, d))), 1e-14);
  }
}

TEST(ProbeDerivatives, ParameterCountMismatch) {
  const std::vector<double> p{0.3};
  EXPECT_THROW(probe_with_derivatives(ProbeFamily::phase_dephasing({0.0}), p),
               std::invalid_argument);
}

TEST(FamilyKindNames, RoundTrip) {
  for (auto k : {FamilyKind::PhaseDephasing, FamilyKind::TwoPhase}) {
    EXPECT_EQ(family_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(family_kind_from_string("three-phase"), std::invalid_argument);
}
