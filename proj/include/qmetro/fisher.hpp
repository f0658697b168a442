#pragma once

// Local estimation theory for a probe/measurement pair: symmetric
// logarithmic derivatives, the quantum Fisher information matrix, the weak
// commutativity value Tr[rho [L_i, L_j]], classical Fisher information of a
// POVM and the kappa figure of merit.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qmetro/linalg.hpp"
#include "qmetro/measurement.hpp"
#include "qmetro/quantum_core.hpp"

namespace qmetro {

struct SldSet {
  std::vector<ComplexMatrix> operators;
  double support_tolerance = 0.0;
};

/// Solves 2 d_i rho = L_i rho + rho L_i in the eigenbasis of rho. Pairs of
/// eigenvalues whose sum is at or below the support tolerance get a zero
/// entry (Moore-Penrose convention). The default tolerance is 1e-12 times the
/// largest eigenvalue.
SldSet sld_operators(const StateWithDerivatives& swd,
                     std::optional<double> support_tolerance = std::nullopt);

/// H_ij = Re Tr[rho {L_i, L_j}] / 2.
RealMatrix qfi_matrix(const StateWithDerivatives& swd, const SldSet& slds);

/// Tr[rho [L_i, L_j]] / i = 2 Im Tr[rho L_i L_j]. Zero iff the pair is jointly
/// QCR-saturable.
double weak_commutativity(const StateWithDerivatives& swd, const SldSet& slds, int i, int j);

/// p(k) and d_i p(k) for every POVM outcome.
struct OutcomeProbabilities {
  std::vector<std::string> labels;
  RealVector probabilities;  // size K
  RealMatrix derivatives;    // n x K
};

OutcomeProbabilities measurement_probabilities(const StateWithDerivatives& swd, const Povm& povm);

inline constexpr double kDefaultProbabilityCutoff = 1e-12;

struct FisherReport {
  RealMatrix classical_fi;
  /// 1 / (F^-1)_jj; zero for parameters touching the null space of a singular F.
  RealVector effective_fi;
  bool singular = false;
  /// A dropped outcome still had a non-vanishing derivative, so the true FI
  /// contribution diverges.
  bool boundary = false;
  std::vector<std::string> dropped_outcomes;
};

FisherReport classical_fi(const OutcomeProbabilities& probs,
                          double p_cutoff = kDefaultProbabilityCutoff);

struct KappaResult {
  double kappa = 0.0;
  /// (F^eff_jj / m) / H_jj per parameter; zero when excluded.
  std::vector<double> per_parameter;
  int copies = 1;
  /// Parameters whose single-copy QFI diagonal is not positive.
  std::vector<int> excluded;
  bool partial = false;
};

/// QFI diagonal entries at or below this value are treated as non-positive.
inline constexpr double kQfiFloor = 1e-14;

/// kappa = sum_j (F^eff_jj / m) / H_jj with H the single-copy QFI.
KappaResult kappa(const FisherReport& report, std::span<const double> single_copy_qfi_diagonal,
                  int copies);

/// Single-copy QFI diagonal. With unequal input phases across copies this is
/// the average over copies, so that m times it equals the m-copy QFI diagonal.
std::vector<double> single_copy_qfi_diagonal(const ProbeFamily& family,
                                             std::span<const double> params);

struct KappaEvaluation {
  FisherReport fisher;
  KappaResult kappa;
};

/// Full pipeline: probe state, POVM statistics, classical FI and kappa.
KappaEvaluation evaluate_kappa(const ProbeFamily& family, std::span<const double> params,
                               const Povm& povm, double p_cutoff = kDefaultProbabilityCutoff);

/// Input phase xi in [0, 2 pi) at which the TwoPhase weak commutativity
/// vanishes, located by a sign-change scan plus bisection. Empty if the scan
/// finds no sign change.
std::optional<double> find_commuting_phase(double phi_y, double phi_z, int scan_points = 64);

}  // namespace qmetro
