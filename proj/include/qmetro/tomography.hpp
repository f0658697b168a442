#pragma once

// Detector tomography: characterise an unknown two-qubit measurement from
// the counts it records for the 36 product reference states built from
// {H, V, D, A, R, L} on each qubit.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "qmetro/linalg.hpp"
#include "qmetro/measurement.hpp"
#include "qmetro/quantum_core.hpp"

namespace qmetro {

/// Single-qubit reference labels in table order.
inline constexpr std::string_view kReferenceLabels = "HVDARL";

struct ReferenceState {
  char first;
  char second;
  DensityMatrix state;
};

struct ReferenceSet {
  std::vector<ReferenceState> states;
  /// Rank of the real Gram matrix of the states as operator-space vectors.
  int gram_rank = 0;
  double gram_condition = 0.0;

  std::size_t index_of(char first, char second) const;
};

/// Ket of a single-qubit reference label (H=|0>, V=|1>, D, A, R, L).
ComplexVector reference_ket(char label);

/// The 36 product states, first label slow. Asserts a Gram rank of 16.
ReferenceSet reference_states();

/// Counts per (reference input, outcome). Rows follow the order of the
/// reference set; columns follow `outcome_labels`.
struct CountsTable {
  std::vector<std::array<char, 2>> inputs;
  std::vector<std::string> outcome_labels;
  RealMatrix counts;
  /// Expected total counts per input setting.
  double exposure = 0.0;
};

/// Poisson counts with mean exposure * Tr[rho_j Pi_k]. Deterministic in `seed`.
CountsTable simulate_counts(const Povm& povm, const ReferenceSet& refs, double exposure,
                            std::uint64_t seed);

/// Noise-free counts exposure * Tr[rho_j Pi_k] (not rounded).
CountsTable expected_counts(const Povm& povm, const ReferenceSet& refs, double exposure);

struct MleOptions {
  int max_iters = 5000;
  /// Stop once the relative log-likelihood change drops below this.
  double tol = 1e-10;
};

struct MleResult {
  Povm povm;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  /// Log-likelihood after each accepted iteration (first entry: the start point).
  std::vector<double> log_likelihood_history;
  /// Observed events with model probability below the 1e-12 floor.
  int floored_events = 0;
};

/// Maximum-likelihood POVM under positivity and completeness, via the
/// multiplicative update Pi_k <- S^{-1/2} R_k Pi_k R_k S^{-1/2}, diluted
/// whenever a full step would lower the likelihood.
MleResult mle_reconstruct(const CountsTable& counts, const ReferenceSet& refs,
                          const MleOptions& options = {});

/// Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2 of the trace-normalised elements.
double povm_fidelity(const ComplexMatrix& candidate, const ComplexMatrix& ideal);

/// Half the trace norm of the difference.
double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b);

struct MonteCarloSummary {
  double mean = 0.0;
  double standard_deviation = 0.0;
  int runs = 0;
  int failed_runs = 0;
  std::vector<double> samples;
};

/// Resamples each count from a Poisson law with the observed count as mean
/// and re-evaluates `derived` per run. Runs are seeded from (seed, run index).
/// Throws std::runtime_error when more than 10% of runs fail.
MonteCarloSummary monte_carlo_uncertainty(const CountsTable& counts,
                                          const std::function<double(const CountsTable&)>& derived,
                                          int runs, std::uint64_t seed);

/// CSV with header `input1,input2,outcome,counts`.
std::string counts_to_csv(const CountsTable& table);

/// Parses the counts CSV; every reference input must appear with every
/// outcome exactly once. Outcome order follows first appearance.
CountsTable counts_from_csv(std::string_view text, const ReferenceSet& refs);

}  // namespace qmetro
