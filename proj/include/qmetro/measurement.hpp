#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "qmetro/linalg.hpp"

namespace qmetro {

/// Two-qubit analysis outcomes, in file and report order.
inline const std::array<std::string, 4> kAnalysisLabels{"DD", "DA", "AD", "AA"};

struct PovmOutcome {
  std::string label;
  ComplexMatrix element;
};

/// Ordered, labelled measurement operators of a common dimension. The
/// constructor checks shapes and label uniqueness only; positivity and
/// completeness are reported by validate_povm().
class Povm {
 public:
  Povm() = default;
  explicit Povm(std::vector<PovmOutcome> outcomes);

  int dim() const { return dim_; }
  std::size_t size() const { return outcomes_.size(); }
  const std::vector<PovmOutcome>& outcomes() const { return outcomes_; }
  const PovmOutcome& operator[](std::size_t k) const { return outcomes_[k]; }
  std::vector<std::string> labels() const;
  /// Index of `label`, throws std::out_of_range if absent.
  std::size_t index_of(std::string_view label) const;

 private:
  int dim_ = 0;
  std::vector<PovmOutcome> outcomes_;
};

struct PovmValidation {
  double max_hermiticity_violation = 0.0;
  double min_eigenvalue = 0.0;
  double completeness_residual = 0.0;
  bool passed = false;
};

inline constexpr double kPovmHermiticityTolerance = 1e-10;
inline constexpr double kPovmPositivityTolerance = 1e-10;
inline constexpr double kPovmCompletenessTolerance = 1e-9;

/// Hermiticity, positivity and completeness (max entrywise |sum - I|) check.
PovmValidation validate_povm(const Povm& povm);

/// Projectors onto Phi+ (DD), Psi+ (DA), Phi- (AD), Psi- (AA).
Povm bell_povm();

/// Orthonormal single-qubit basis on the Bloch sphere:
/// |b0> = cos(theta/2)|0> + e^{i alpha} sin(theta/2)|1>, |b1> orthogonal to it.
struct AnalysisBasis {
  double theta = 0.0;
  double alpha = 0.0;
};

/// Rank-1 projectors of a single-qubit analysis, labelled "D" (|b0>) and "A" (|b1>).
Povm single_qubit_projective_povm(const AnalysisBasis& basis);

/// Independent analysis of each qubit; outcomes labelled DD, DA, AD, AA.
Povm product_projective_povm(const AnalysisBasis& first, const AnalysisBasis& second);

/// Partially polarising beam-splitter model of the post-selected
/// controlled-sign gate followed by D/A analysis of both photons.
struct GateModel {
  double t_h = 1.0;
  double t_v = 0.57735026918962573;  // 1/sqrt(3)
  /// Weight of the two-photon interference coherences, in [0, 1].
  double visibility = 1.0;
  /// Adds the 90-degree rotated PPBS on each arm, equalising all amplitudes.
  bool compensated = true;
};

struct GatePovm {
  /// Conditional (post-selected) POVM; elements sum to the identity.
  Povm povm;
  /// Coincidence amplitudes of HH, HV, VH, VV through the gate.
  std::array<double, 4> amplitudes{};
  /// Post-selection success probability |A|^2 for each polarisation basis
  /// state HH, HV, VH, VV entering the gate.
  std::array<double, 4> success_probability{};
};

/// Amplitudes t_{x1} t_{x2} - r_{x1} r_{x2} (times the compensating pair when enabled).
std::array<double, 4> gate_amplitudes(const GateModel& model);

GatePovm cs_gate_povm(const GateModel& model);

}  // namespace qmetro
