#pragma once

// Qubit probe states, the rotation unitary and the two parametrised probe
// families, including their multi-copy tensor powers and parameter
// derivatives.
//
// Index convention: computational basis |0>,|1> per qubit; multi-qubit
// ordering |00>,|01>,|10>,|11> with qubit 1 as the slow index. The
// polarisation coding ({H,V} for qubit 1, {D,A} for qubit 2) is labelling
// only; every matrix here is written in the logical basis.

#include <span>
#include <string>
#include <vector>

#include "qmetro/linalg.hpp"

namespace qmetro {

/// Tolerance used for the structural invariants of states and POVMs.
inline constexpr double kStructuralTolerance = 1e-10;

/// Hermitian, positive semidefinite, unit-trace matrix. Construction
/// validates the invariants and throws std::invalid_argument on violation.
class DensityMatrix {
 public:
  explicit DensityMatrix(ComplexMatrix matrix);

  static DensityMatrix from_pure(const ComplexVector& ket);

  const ComplexMatrix& matrix() const { return matrix_; }
  int dim() const { return static_cast<int>(matrix_.rows()); }
  double purity() const;

 private:
  ComplexMatrix matrix_;
};

/// Kronecker product; the first factor is the slow index.
ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b);

/// |psi0><psi0| with |psi0> = (|0> + e^{i xi}|1>)/sqrt(2).
DensityMatrix make_equatorial_state(double xi);

/// exp{i (phi_y sigma_y + phi_z sigma_z)} in closed form.
ComplexMatrix rotation_unitary(double phi_y, double phi_z);

/// Equatorial probe rotated by phi about z and dephased by delta:
/// off-diagonal (0,1) entry e^{-i(phi+xi) - delta^2}/2.
DensityMatrix dephased_phase_state(double xi, double phi, double delta);

enum class FamilyKind { PhaseDephasing, TwoPhase };

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

/// A parametrised probe: m copies of an equatorial qubit, each with its own
/// input phase, sent through the same parameter-dependent channel.
///
/// PhaseDephasing parameters are (phi, delta); TwoPhase parameters are
/// (phi_y, phi_z).
struct ProbeFamily {
  FamilyKind kind = FamilyKind::PhaseDephasing;
  /// Input phase xi of each copy; its size is the number of copies m.
  std::vector<double> input_phases{0.0};
  /// Central finite-difference step for TwoPhase derivatives (radians).
  double fd_step = 1e-5;

  static ProbeFamily phase_dephasing(std::vector<double> input_phases);
  static ProbeFamily two_phase(std::vector<double> input_phases);

  int copies() const { return static_cast<int>(input_phases.size()); }
  int num_parameters() const { return 2; }
  std::vector<std::string> parameter_names() const;
};

/// rho(params) and d rho / d params_i, one Hermitian traceless matrix per parameter.
struct StateWithDerivatives {
  DensityMatrix state;
  std::vector<ComplexMatrix> derivatives;

  int dim() const { return state.dim(); }
  int num_parameters() const { return static_cast<int>(derivatives.size()); }
};

/// The m-copy probe rho_1 (x) ... (x) rho_m and its derivatives via the
/// product rule. PhaseDephasing derivatives are analytic; TwoPhase
/// derivatives use central differences of the rotated ket.
StateWithDerivatives probe_with_derivatives(const ProbeFamily& family,
                                            std::span<const double> params);

/// Single-copy probe with input phase `xi`.
StateWithDerivatives single_copy_probe(FamilyKind kind, double xi, std::span<const double> params,
                                       double fd_step = 1e-5);

/// Largest entrywise gap between the TwoPhase derivatives computed with
/// step h and with step h/2. Zero for analytic families.
double finite_difference_discrepancy(const ProbeFamily& family, std::span<const double> params);

}  // namespace qmetro
