#include "qmetro/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include <fmt/core.h>

#include "qmetro/quantum_core.hpp"

namespace qmetro {

Povm::Povm(std::vector<PovmOutcome> outcomes) : outcomes_(std::move(outcomes)) {
  if (outcomes_.empty()) throw std::invalid_argument("POVM needs at least one outcome");
  dim_ = static_cast<int>(outcomes_.front().element.rows());
  for (std::size_t k = 0; k < outcomes_.size(); ++k) {
    const auto& e = outcomes_[k].element;
    if (e.rows() != dim_ || e.cols() != dim_ || dim_ == 0) {
      throw std::invalid_argument(
          fmt::format("POVM element '{}' is not {}x{}", outcomes_[k].label, dim_, dim_));
    }
    if (!e.allFinite()) {
      throw std::invalid_argument(fmt::format("POVM element '{}' is not finite", outcomes_[k].label));
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (outcomes_[j].label == outcomes_[k].label) {
        throw std::invalid_argument("duplicate POVM label '" + outcomes_[k].label + "'");
      }
    }
  }
}

std::vector<std::string> Povm::labels() const {
  std::vector<std::string> out;
  out.reserve(outcomes_.size());
  for (const auto& o : outcomes_) out.push_back(o.label);
  return out;
}

std::size_t Povm::index_of(std::string_view label) const {
  for (std::size_t k = 0; k < outcomes_.size(); ++k) {
    if (outcomes_[k].label == label) return k;
  }
  throw std::out_of_range(fmt::format("POVM has no outcome '{}'", label));
}

PovmValidation validate_povm(const Povm& povm) {
  PovmValidation report;
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  ComplexMatrix sum = ComplexMatrix::Zero(povm.dim(), povm.dim());
  for (const auto& o : povm.outcomes()) {
    report.max_hermiticity_violation =
        std::max(report.max_hermiticity_violation, hermiticity_violation(o.element));
    report.min_eigenvalue = std::min(report.min_eigenvalue, min_eigenvalue(o.element));
    sum += o.element;
  }
  report.completeness_residual =
      (sum - ComplexMatrix::Identity(povm.dim(), povm.dim())).cwiseAbs().maxCoeff();
  report.passed = report.max_hermiticity_violation <= kPovmHermiticityTolerance &&
                  report.min_eigenvalue >= -kPovmPositivityTolerance &&
                  report.completeness_residual <= kPovmCompletenessTolerance;
  return report;
}

namespace {

ComplexMatrix projector(const ComplexVector& ket) { return ket * ket.adjoint(); }

ComplexVector basis_ket(const AnalysisBasis& b, int which) {
  ComplexVector ket(2);
  const double c = std::cos(b.theta / 2.0);
  const double s = std::sin(b.theta / 2.0);
  const Complex phase = std::exp(kI * b.alpha);
  if (which == 0) {
    ket << c, phase * s;
  } else {
    ket << s, -phase * c;
  }
  return ket;
}

void check_unit_interval(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument(fmt::format("{} = {} outside [0, 1]", name, value));
  }
}

}  // namespace

Povm bell_povm() {
  const double s = 1.0 / std::sqrt(2.0);
  std::array<ComplexVector, 4> kets;
  for (auto& k : kets) k = ComplexVector::Zero(4);
  kets[0](0) = s, kets[0](3) = s;   // Phi+
  kets[1](1) = s, kets[1](2) = s;   // Psi+
  kets[2](0) = s, kets[2](3) = -s;  // Phi-
  kets[3](1) = s, kets[3](2) = -s;  // Psi-
  std::vector<PovmOutcome> out;
  for (std::size_t k = 0; k < 4; ++k) out.push_back({kAnalysisLabels[k], projector(kets[k])});
  return Povm(std::move(out));
}

Povm single_qubit_projective_povm(const AnalysisBasis& basis) {
  return Povm({{"D", projector(basis_ket(basis, 0))}, {"A", projector(basis_ket(basis, 1))}});
}

Povm product_projective_povm(const AnalysisBasis& first, const AnalysisBasis& second) {
  std::vector<PovmOutcome> out;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      out.push_back({kAnalysisLabels[2 * a + b], tensor_product(projector(basis_ket(first, a)),
                                                                projector(basis_ket(second, b)))});
    }
  }
  return Povm(std::move(out));
}

std::array<double, 4> gate_amplitudes(const GateModel& model) {
  check_unit_interval(model.t_h, "t_H");
  check_unit_interval(model.t_v, "t_V");
  const std::array<double, 2> t{model.t_h, model.t_v};
  const std::array<double, 2> r{std::sqrt(1.0 - model.t_h * model.t_h),
                                std::sqrt(1.0 - model.t_v * model.t_v)};
  std::array<double, 4> amp{};
  for (int x1 = 0; x1 < 2; ++x1) {
    for (int x2 = 0; x2 < 2; ++x2) {
      double a = t[x1] * t[x2] - r[x1] * r[x2];
      // Rotated PPBS on each arm: transmittivities of H and V swapped.
      if (model.compensated) a *= t[1 - x1] * t[1 - x2];
      amp[2 * x1 + x2] = a;
    }
  }
  return amp;
}

GatePovm cs_gate_povm(const GateModel& model) {
  check_unit_interval(model.visibility, "visibility");
  GatePovm result;
  result.amplitudes = gate_amplitudes(model);

  ComplexMatrix gate = ComplexMatrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) gate(i, i) = result.amplitudes[i];

  // Physical H/V basis of both photons -> logical basis, where qubit 2 is
  // coded in D/A.
  ComplexMatrix hadamard(2, 2);
  hadamard << 1.0, 1.0, 1.0, -1.0;
  hadamard /= std::sqrt(2.0);
  const ComplexMatrix to_logical = tensor_product(ComplexMatrix::Identity(2, 2), hadamard);

  std::vector<ComplexMatrix> elements;
  ComplexMatrix total = ComplexMatrix::Zero(4, 4);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const ComplexVector analysis =
          tensor_product(hadamard.col(a), hadamard.col(b));  // |D>/|A> on each photon
      const ComplexMatrix physical = gate.adjoint() * projector(analysis) * gate;
      ComplexMatrix logical = to_logical.adjoint() * physical * to_logical;
      const ComplexMatrix diagonal = logical.diagonal().asDiagonal();
      logical = model.visibility * logical + (1.0 - model.visibility) * diagonal;
      total += logical;
      elements.push_back(std::move(logical));
    }
  }

  for (int i = 0; i < 4; ++i) result.success_probability[i] = std::norm(result.amplitudes[i]);

  const ComplexMatrix normaliser = psd_inverse_sqrt(total);
  std::vector<PovmOutcome> outcomes;
  for (std::size_t k = 0; k < elements.size(); ++k) {
    outcomes.push_back({kAnalysisLabels[k], hermitian_part(normaliser * elements[k] * normaliser)});
  }
  result.povm = Povm(std::move(outcomes));
  return result;
}

}  // namespace qmetro
