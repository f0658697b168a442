#pragma once

// End-to-end kappa scenarios: maximise kappa over probe input phases and
// measurement settings, scan it along a parameter, and search random
// collective measurements on two copies.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "qmetro/fisher.hpp"
#include "qmetro/measurement.hpp"
#include "qmetro/quantum_core.hpp"

namespace qmetro {

/// Independent analysis of each copy; angles come from the scenario inputs
/// theta1, alpha1, theta2, alpha2.
struct ProductMeasurement {};

using MeasurementSpec = std::variant<Povm, ProductMeasurement>;

using Settings = std::map<std::string, double>;

/// A kappa evaluation problem. Input names:
///   phase-dephasing parameters  phi, delta
///   two-phase parameters        phi_y, phi_z
///   probe input phases          xi (shared by all copies) or xi1..xim
///   product analysis angles     theta1, alpha1, theta2, alpha2
/// Free inputs are angles optimised over one period [0, 2 pi).
struct Scenario {
  FamilyKind kind = FamilyKind::PhaseDephasing;
  int copies = 2;
  MeasurementSpec measurement = ProductMeasurement{};
  std::vector<std::string> free_inputs;
  Settings fixed;
  double fd_step = 1e-5;

  /// Names that free and fixed inputs must cover together.
  std::vector<std::string> required_inputs() const;
  /// Throws std::invalid_argument listing every problem found.
  void validate() const;
};

/// kappa for a complete assignment of inputs (fixed merged with `free_values`).
KappaEvaluation evaluate_scenario(const Scenario& scenario, const Settings& free_values);

struct OptimizeOptions {
  int budget = 2000;
  int grid_points = 17;
};

struct OptimizeResult {
  KappaResult best;
  FisherReport fisher;
  /// Optimal free inputs, wrapped into [0, 2 pi).
  Settings settings;
  int evaluations = 0;
  int grid_points_per_dim = 0;
};

/// Coarse periodic grid over the free inputs, then Nelder-Mead refinement
/// from the best grid point. Deterministic for fixed inputs and options.
OptimizeResult optimize_kappa(const Scenario& scenario, const OptimizeOptions& options = {});

struct KappaCurve {
  std::string variable = "delta";
  std::vector<double> grid;
  std::vector<double> kappa_values;
  std::vector<std::vector<double>> per_parameter;
  std::vector<Settings> best_settings;
  std::vector<bool> failed;
  std::vector<std::string> errors;
};

/// Optimises kappa independently at each grid value of `variable`. The grid
/// must be non-empty and strictly monotone.
KappaCurve kappa_scan(const Scenario& scenario, const std::vector<double>& grid,
                      const OptimizeOptions& options = {}, const std::string& variable = "delta");

/// `points` log-spaced values in [lo, hi].
std::vector<double> log_spaced_grid(double lo, double hi, int points);

/// CSV: variable,kappa,contrib_<param>...,best_<input>... with 17 significant digits.
std::string curve_to_csv(const KappaCurve& curve, const std::vector<std::string>& parameter_names);

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of diag(R) absorbed into Q.
ComplexMatrix haar_unitary(int dim, std::mt19937_64& rng);

/// Rank-1 projectors onto the columns of a unitary, labelled "b0", "b1", ...
Povm basis_povm(const ComplexMatrix& unitary);

struct CollectiveSearchOptions {
  double phi_y = 0.0;
  double phi_z = 0.0;
  /// Inputs optimised per trial (xi is shared by both copies).
  std::vector<std::string> free_inputs{"xi"};
  OptimizeOptions per_trial{60, 17};
};

struct CollectiveSearchResult {
  double max_kappa = 0.0;
  int best_trial = -1;
  Settings best_settings;
  ComplexMatrix best_unitary;
  std::vector<double> trial_kappas;
};

/// Two-phase kappa for `trials` Haar-random projective measurements on two
/// copies, each with its own input-phase optimisation. Trial t draws from an
/// RNG seeded by (seed, t).
CollectiveSearchResult random_collective_search(int trials, std::uint64_t seed,
                                                const CollectiveSearchOptions& options = {});

}  // namespace qmetro
