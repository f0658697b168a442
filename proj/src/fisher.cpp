#include "qmetro/fisher.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/core.h>

namespace qmetro {

namespace {

/// Tr[A B] without forming the product.
Complex trace_of_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a.transpose().cwiseProduct(b).sum();
}

void check_consistent(const StateWithDerivatives& swd) {
  for (const auto& d : swd.derivatives) {
    if (d.rows() != swd.dim() || d.cols() != swd.dim()) {
      throw std::invalid_argument("state and derivatives differ in dimension");
    }
  }
}

}  // namespace

SldSet sld_operators(const StateWithDerivatives& swd, std::optional<double> support_tolerance) {
  check_consistent(swd);
  for (const auto& d : swd.derivatives) {
    if (hermiticity_violation(d) > 1e-9) {
      throw std::invalid_argument("state derivative is not Hermitian");
    }
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(swd.state.matrix());
  const RealVector& lambda = es.eigenvalues();
  const ComplexMatrix& v = es.eigenvectors();

  SldSet out;
  out.support_tolerance = support_tolerance.value_or(1e-12 * lambda.maxCoeff());
  for (const auto& d : swd.derivatives) {
    ComplexMatrix local = v.adjoint() * d * v;
    for (Eigen::Index m = 0; m < local.rows(); ++m) {
      for (Eigen::Index n = 0; n < local.cols(); ++n) {
        const double s = lambda(m) + lambda(n);
        local(m, n) = s > out.support_tolerance ? 2.0 * local(m, n) / s : Complex{};
      }
    }
    out.operators.push_back(hermitian_part(v * local * v.adjoint()));
  }
  return out;
}

RealMatrix qfi_matrix(const StateWithDerivatives& swd, const SldSet& slds) {
  const auto n = static_cast<Eigen::Index>(slds.operators.size());
  RealMatrix h(n, n);
  const ComplexMatrix& rho = swd.state.matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    const ComplexMatrix rho_li = rho * slds.operators[i];
    for (Eigen::Index j = i; j < n; ++j) {
      h(i, j) = h(j, i) = trace_of_product(rho_li, slds.operators[j]).real();
    }
  }
  return h;
}

double weak_commutativity(const StateWithDerivatives& swd, const SldSet& slds, int i, int j) {
  const int n = static_cast<int>(slds.operators.size());
  if (i < 0 || j < 0 || i >= n || j >= n) throw std::out_of_range("SLD index out of range");
  if (i == j) return 0.0;
  const ComplexMatrix rho_li = swd.state.matrix() * slds.operators[i];
  return 2.0 * trace_of_product(rho_li, slds.operators[j]).imag();
}

OutcomeProbabilities measurement_probabilities(const StateWithDerivatives& swd, const Povm& povm) {
  check_consistent(swd);
  if (povm.dim() != swd.dim()) {
    throw std::invalid_argument(
        fmt::format("POVM dimension {} does not match state dimension {}", povm.dim(), swd.dim()));
  }
  const auto k_count = static_cast<Eigen::Index>(povm.size());
  OutcomeProbabilities out;
  out.labels = povm.labels();
  out.probabilities.resize(k_count);
  out.derivatives.resize(swd.num_parameters(), k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const ComplexMatrix& element = povm[k].element;
    const Complex p = trace_of_product(swd.state.matrix(), element);
    if (std::abs(p.imag()) > 1e-10) {
      throw std::invalid_argument("probability has an imaginary part; POVM not Hermitian?");
    }
    out.probabilities(k) = p.real();
    for (int i = 0; i < swd.num_parameters(); ++i) {
      const Complex dp = trace_of_product(swd.derivatives[i], element);
      if (std::abs(dp.imag()) > 1e-10) {
        throw std::invalid_argument("probability derivative has an imaginary part");
      }
      out.derivatives(i, k) = dp.real();
    }
  }
  return out;
}

FisherReport classical_fi(const OutcomeProbabilities& probs, double p_cutoff) {
  const Eigen::Index n = probs.derivatives.rows();
  const Eigen::Index k_count = probs.probabilities.size();
  if (probs.derivatives.cols() != k_count) {
    throw std::invalid_argument("derivative table does not match the number of outcomes");
  }
  if (std::abs(probs.probabilities.sum() - 1.0) > 1e-6) {
    throw std::invalid_argument(
        fmt::format("probabilities sum to {}, expected 1", probs.probabilities.sum()));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(probs.derivatives.row(i).sum()) > 1e-6) {
      throw std::invalid_argument("probability derivatives do not sum to zero");
    }
  }

  FisherReport report;
  report.classical_fi = RealMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const double p = probs.probabilities(k);
    if (p < -1e-12) {
      throw std::invalid_argument(fmt::format("negative probability {} for outcome {}", p, k));
    }
    const auto dp = probs.derivatives.col(k);
    if (p < p_cutoff) {
      report.dropped_outcomes.push_back(k < static_cast<Eigen::Index>(probs.labels.size())
                                            ? probs.labels[k]
                                            : std::to_string(k));
      if (dp.cwiseAbs().maxCoeff() > 1e-8) report.boundary = true;
      continue;
    }
    report.classical_fi += dp * dp.transpose() / p;
  }

  const RealMatrix& f = report.classical_fi;
  const double max_diag = n > 0 ? f.diagonal().maxCoeff() : 0.0;
  report.singular = max_diag <= 0.0 || std::abs(f.determinant()) < 1e-12 * std::pow(max_diag, n);
  report.effective_fi = RealVector::Zero(n);
  if (!report.singular) {
    const RealMatrix inv = f.inverse();
    for (Eigen::Index j = 0; j < n; ++j) report.effective_fi(j) = 1.0 / inv(j, j);
    return report;
  }
  if (max_diag <= 0.0) return report;

  // Parameters with weight on the null space cannot be estimated; the rest
  // get the Schur complement against the other parameters.
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(f);
  const RealVector& ev = es.eigenvalues();
  const double cut = 1e-8 * ev.maxCoeff();
  RealVector null_weight = RealVector::Zero(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    if (c == 0 || ev(c) <= cut) null_weight += es.eigenvectors().col(c).cwiseAbs2();
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (null_weight(j) > 1e-12) continue;
    std::vector<Eigen::Index> rest;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r != j) rest.push_back(r);
    }
    RealMatrix f_rr(rest.size(), rest.size());
    RealVector f_jr(rest.size());
    for (std::size_t a = 0; a < rest.size(); ++a) {
      f_jr(a) = f(j, rest[a]);
      for (std::size_t b = 0; b < rest.size(); ++b) f_rr(a, b) = f(rest[a], rest[b]);
    }
    const RealMatrix pinv = f_rr.completeOrthogonalDecomposition().pseudoInverse();
    report.effective_fi(j) = std::max(0.0, f(j, j) - f_jr.dot(pinv * f_jr));
  }
  return report;
}

KappaResult kappa(const FisherReport& report, std::span<const double> single_copy_qfi_diagonal,
                  int copies) {
  if (copies < 1) throw std::invalid_argument("copies must be positive");
  const auto n = static_cast<std::size_t>(report.effective_fi.size());
  if (single_copy_qfi_diagonal.size() != n) {
    throw std::invalid_argument("QFI diagonal length does not match the number of parameters");
  }
  KappaResult out;
  out.copies = copies;
  out.per_parameter.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double h = single_copy_qfi_diagonal[j];
    if (!(h > kQfiFloor)) {
      out.excluded.push_back(static_cast<int>(j));
      out.partial = true;
      continue;
    }
    // Denominator is always the single-copy QFI; the m-copy FI is divided by m.
    out.per_parameter[j] = report.effective_fi(static_cast<Eigen::Index>(j)) / copies / h;
    out.kappa += out.per_parameter[j];
  }
  return out;
}

std::vector<double> single_copy_qfi_diagonal(const ProbeFamily& family,
                                             std::span<const double> params) {
  std::vector<double> diag(family.num_parameters(), 0.0);
  for (double xi : family.input_phases) {
    const StateWithDerivatives swd = single_copy_probe(family.kind, xi, params, family.fd_step);
    const RealMatrix h = qfi_matrix(swd, sld_operators(swd));
    for (int j = 0; j < family.num_parameters(); ++j) diag[j] += h(j, j) / family.copies();
  }
  return diag;
}

KappaEvaluation evaluate_kappa(const ProbeFamily& family, std::span<const double> params,
                               const Povm& povm, double p_cutoff) {
  const StateWithDerivatives swd = probe_with_derivatives(family, params);
  KappaEvaluation out;
  out.fisher = classical_fi(measurement_probabilities(swd, povm), p_cutoff);
  out.kappa = kappa(out.fisher, single_copy_qfi_diagonal(family, params), family.copies());
  return out;
}

std::optional<double> find_commuting_phase(double phi_y, double phi_z, int scan_points) {
  if (scan_points < 2) throw std::invalid_argument("scan needs at least two points");
  const std::array<double, 2> params{phi_y, phi_z};
  auto value = [&](double xi) {
    const StateWithDerivatives swd = single_copy_probe(FamilyKind::TwoPhase, xi, params);
    return weak_commutativity(swd, sld_operators(swd), 0, 1);
  };
  const double step = 2.0 * std::numbers::pi / scan_points;
  double lo = 0.0;
  double f_lo = value(lo);
  for (int s = 1; s <= scan_points; ++s) {
    const double hi = s * step;
    const double f_hi = value(hi);
    if (f_lo == 0.0) return lo;
    if ((f_lo < 0.0) != (f_hi < 0.0)) {
      double a = lo;
      double b = hi;
      double f_a = f_lo;
      while (b - a > 1e-14) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        const double f_mid = value(mid);
        if (f_mid == 0.0) return mid;
        if ((f_a < 0.0) == (f_mid < 0.0)) {
          a = mid;
          f_a = f_mid;
        } else {
          b = mid;
        }
      }
      return std::fmod(0.5 * (a + b), 2.0 * std::numbers::pi);
    }
    lo = hi;
    f_lo = f_hi;
  }
  return std::nullopt;
}

}  // namespace qmetro
