#include "qmetro/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace qmetro {

ComplexMatrix pauli_x() {
  ComplexMatrix s(2, 2);
  s << 0.0, 1.0, 1.0, 0.0;
  return s;
}

ComplexMatrix pauli_y() {
  ComplexMatrix s(2, 2);
  s << 0.0, -kI, kI, 0.0;
  return s;
}

ComplexMatrix pauli_z() {
  ComplexMatrix s(2, 2);
  s << 1.0, 0.0, 0.0, -1.0;
  return s;
}

double hermiticity_violation(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

ComplexMatrix hermitian_part(const ComplexMatrix& a) { return 0.5 * (a + a.adjoint()); }

double min_eigenvalue(const ComplexMatrix& a) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

int numerical_rank(const RealMatrix& a, double relative_tolerance) {
  Eigen::JacobiSVD<RealMatrix> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return static_cast<int>((s.array() > relative_tolerance * s(0)).count());
}

ComplexMatrix psd_sqrt(const ComplexMatrix& a) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(a));
  RealVector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
}

ComplexMatrix psd_inverse_sqrt(const ComplexMatrix& a, double tolerance) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(a));
  const RealVector& ev = es.eigenvalues();
  const double cut = tolerance * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  RealVector inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    inv(i) = ev(i) > cut && ev(i) > 0.0 ? 1.0 / std::sqrt(ev(i)) : 0.0;
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
}

double trace_norm(const ComplexMatrix& a) {
  Eigen::JacobiSVD<ComplexMatrix> svd(a);
  return svd.singularValues().sum();
}

}  // namespace qmetro
