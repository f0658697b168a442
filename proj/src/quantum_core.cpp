#include "qmetro/quantum_core.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include <fmt/core.h>

namespace qmetro {

namespace {

void require_finite(double value, const char* name) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument(fmt::format("{} must be finite", name));
  }
}

ComplexVector equatorial_ket(double xi) {
  ComplexVector ket(2);
  ket << 1.0, std::exp(kI * xi);
  return ket / std::sqrt(2.0);
}

StateWithDerivatives dephasing_copy(double xi, double phi, double delta) {
  DensityMatrix rho = dephased_phase_state(xi, phi, delta);
  const Complex off = rho.matrix()(0, 1);

  ComplexMatrix d_phi = ComplexMatrix::Zero(2, 2);
  d_phi(0, 1) = -kI * off;
  d_phi(1, 0) = std::conj(d_phi(0, 1));

  ComplexMatrix d_delta = ComplexMatrix::Zero(2, 2);
  d_delta(0, 1) = -2.0 * delta * off;
  d_delta(1, 0) = std::conj(d_delta(0, 1));

  return {std::move(rho), {std::move(d_phi), std::move(d_delta)}};
}

ComplexVector rotated_ket(double xi, double phi_y, double phi_z) {
  return rotation_unitary(phi_y, phi_z) * equatorial_ket(xi);
}

std::vector<ComplexMatrix> two_phase_derivatives(double xi, double phi_y, double phi_z, double h) {
  const ComplexVector ket = rotated_ket(xi, phi_y, phi_z);
  const ComplexVector d_y =
      (rotated_ket(xi, phi_y + h, phi_z) - rotated_ket(xi, phi_y - h, phi_z)) / (2.0 * h);
  const ComplexVector d_z =
      (rotated_ket(xi, phi_y, phi_z + h) - rotated_ket(xi, phi_y, phi_z - h)) / (2.0 * h);
  std::vector<ComplexMatrix> out;
  for (const ComplexVector* d : {&d_y, &d_z}) {
    out.push_back(*d * ket.adjoint() + ket * d->adjoint());
  }
  return out;
}

}  // namespace

DensityMatrix::DensityMatrix(ComplexMatrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() == 0 || matrix_.rows() != matrix_.cols()) {
    throw std::invalid_argument("density matrix must be square and non-empty");
  }
  if (!matrix_.allFinite()) {
    throw std::invalid_argument("density matrix has non-finite entries");
  }
  if (const double h = hermiticity_violation(matrix_); h > kStructuralTolerance) {
    throw std::invalid_argument(fmt::format("density matrix not Hermitian (violation {:.3g})", h));
  }
  if (const double t = std::abs(matrix_.trace() - 1.0); t > kStructuralTolerance) {
    throw std::invalid_argument(fmt::format("density matrix trace deviates from 1 by {:.3g}", t));
  }
  if (const double e = min_eigenvalue(matrix_); e < -kStructuralTolerance) {
    throw std::invalid_argument(fmt::format("density matrix has negative eigenvalue {:.3g}", e));
  }
}

DensityMatrix DensityMatrix::from_pure(const ComplexVector& ket) {
  const double norm = ket.norm();
  if (norm == 0.0 || !std::isfinite(norm)) {
    throw std::invalid_argument("ket must have finite non-zero norm");
  }
  const ComplexVector k = ket / norm;
  return DensityMatrix(k * k.adjoint());
}

double DensityMatrix::purity() const { return (matrix_ * matrix_).trace().real(); }

ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

DensityMatrix make_equatorial_state(double xi) {
  require_finite(xi, "xi");
  return DensityMatrix::from_pure(equatorial_ket(xi));
}

ComplexMatrix rotation_unitary(double phi_y, double phi_z) {
  require_finite(phi_y, "phi_y");
  require_finite(phi_z, "phi_z");
  const double theta = std::hypot(phi_y, phi_z);
  double c = 0.0;
  double sinc = 0.0;
  if (theta < 1e-8) {
    const double t2 = theta * theta;
    c = 1.0 - t2 / 2.0;
    sinc = 1.0 - t2 / 6.0;
  } else {
    c = std::cos(theta);
    sinc = std::sin(theta) / theta;
  }
  const ComplexMatrix generator = phi_y * pauli_y() + phi_z * pauli_z();
  return c * ComplexMatrix::Identity(2, 2) + kI * sinc * generator;
}

DensityMatrix dephased_phase_state(double xi, double phi, double delta) {
  require_finite(xi, "xi");
  require_finite(phi, "phi");
  require_finite(delta, "delta");
  if (delta < 0.0) throw std::invalid_argument("delta must be non-negative");
  ComplexMatrix rho(2, 2);
  const Complex off = 0.5 * std::exp(-kI * (phi + xi) - delta * delta);
  rho << 0.5, off, std::conj(off), 0.5;
  return DensityMatrix(std::move(rho));
}

std::string to_string(FamilyKind kind) {
  return kind == FamilyKind::PhaseDephasing ? "phase-dephasing" : "two-phase";
}

FamilyKind family_kind_from_string(const std::string& name) {
  if (name == "phase-dephasing") return FamilyKind::PhaseDephasing;
  if (name == "two-phase") return FamilyKind::TwoPhase;
  throw std::invalid_argument("unknown probe family '" + name + "'");
}

ProbeFamily ProbeFamily::phase_dephasing(std::vector<double> input_phases) {
  return {FamilyKind::PhaseDephasing, std::move(input_phases)};
}

ProbeFamily ProbeFamily::two_phase(std::vector<double> input_phases) {
  return {FamilyKind::TwoPhase, std::move(input_phases)};
}

std::vector<std::string> ProbeFamily::parameter_names() const {
  if (kind == FamilyKind::PhaseDephasing) return {"phi", "delta"};
  return {"phi_y", "phi_z"};
}

StateWithDerivatives single_copy_probe(FamilyKind kind, double xi, std::span<const double> params,
                                       double fd_step) {
  if (params.size() != 2) {
    throw std::invalid_argument(
        fmt::format("probe family expects 2 parameters, got {}", params.size()));
  }
  if (kind == FamilyKind::PhaseDephasing) return dephasing_copy(xi, params[0], params[1]);

  require_finite(xi, "xi");
  if (!(fd_step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const ComplexVector ket = rotated_ket(xi, params[0], params[1]);
  return {DensityMatrix::from_pure(ket), two_phase_derivatives(xi, params[0], params[1], fd_step)};
}

StateWithDerivatives probe_with_derivatives(const ProbeFamily& family,
                                            std::span<const double> params) {
  if (family.copies() < 1) throw std::invalid_argument("probe needs at least one copy");
  StateWithDerivatives acc =
      single_copy_probe(family.kind, family.input_phases[0], params, family.fd_step);
  for (int c = 1; c < family.copies(); ++c) {
    const StateWithDerivatives next =
        single_copy_probe(family.kind, family.input_phases[c], params, family.fd_step);
    std::vector<ComplexMatrix> derivatives;
    derivatives.reserve(acc.derivatives.size());
    for (std::size_t i = 0; i < acc.derivatives.size(); ++i) {
      derivatives.push_back(tensor_product(acc.derivatives[i], next.state.matrix()) +
                            tensor_product(acc.state.matrix(), next.derivatives[i]));
    }
    acc = StateWithDerivatives{
        DensityMatrix(tensor_product(acc.state.matrix(), next.state.matrix())),
        std::move(derivatives)};
  }
  return acc;
}

double finite_difference_discrepancy(const ProbeFamily& family, std::span<const double> params) {
  if (family.kind != FamilyKind::TwoPhase) return 0.0;
  ProbeFamily half = family;
  half.fd_step = family.fd_step / 2.0;
  const auto coarse = probe_with_derivatives(family, params);
  const auto fine = probe_with_derivatives(half, params);
  double worst = 0.0;
  for (std::size_t i = 0; i < coarse.derivatives.size(); ++i) {
    worst = std::max(worst, (coarse.derivatives[i] - fine.derivatives[i]).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace qmetro
