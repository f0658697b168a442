#pragma once

#include <complex>

#include <Eigen/Dense>

namespace qmetro {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

ComplexMatrix pauli_x();
ComplexMatrix pauli_y();
ComplexMatrix pauli_z();

/// Largest entrywise |A - A^dagger|.
double hermiticity_violation(const ComplexMatrix& a);

/// Smallest eigenvalue of the Hermitian part of `a`.
double min_eigenvalue(const ComplexMatrix& a);

/// Numerical rank from singular values, relative to the largest one.
int numerical_rank(const RealMatrix& a, double relative_tolerance = 1e-10);

/// Square root of a Hermitian PSD matrix. Negative eigenvalues (round-off) are clamped to zero.
ComplexMatrix psd_sqrt(const ComplexMatrix& a);

/// Moore-Penrose inverse square root of a Hermitian PSD matrix; eigenvalues
/// below `tolerance * largest` are treated as zero.
ComplexMatrix psd_inverse_sqrt(const ComplexMatrix& a, double tolerance = 1e-14);

/// Sum of singular values.
double trace_norm(const ComplexMatrix& a);

/// Hermitian part (A + A^dagger) / 2.
ComplexMatrix hermitian_part(const ComplexMatrix& a);

}  // namespace qmetro
