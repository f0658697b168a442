#include "qmetro/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>
#include <thread>

#include <fmt/core.h>

namespace qmetro {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Runs fn(0..n-1) over the available hardware threads. Each index writes
/// only its own output slot, so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

double wrap_angle(double x) {
  double w = std::fmod(x, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

std::vector<std::string> parameter_inputs(FamilyKind kind) {
  if (kind == FamilyKind::PhaseDephasing) return {"phi", "delta"};
  return {"phi_y", "phi_z"};
}

const std::vector<std::string> kAnalysisInputs{"theta1", "alpha1", "theta2", "alpha2"};

bool has_input(const Scenario& s, const std::string& name) {
  return s.fixed.count(name) > 0 ||
         std::find(s.free_inputs.begin(), s.free_inputs.end(), name) != s.free_inputs.end();
}

double lookup(const Settings& fixed, const Settings& free_values, const std::string& name) {
  if (auto it = free_values.find(name); it != free_values.end()) return it->second;
  if (auto it = fixed.find(name); it != fixed.end()) return it->second;
  throw std::invalid_argument("scenario input '" + name + "' has no value");
}

struct EvalOutcome {
  bool ok = false;
  double kappa = -std::numeric_limits<double>::infinity();
  bool singular = false;
  std::string error;
};

}  // namespace

std::vector<std::string> Scenario::required_inputs() const {
  std::vector<std::string> names = parameter_inputs(kind);
  const bool shared = std::find(free_inputs.begin(), free_inputs.end(), "xi") != free_inputs.end() ||
                      fixed.count("xi") > 0;
  if (shared) {
    names.push_back("xi");
  } else {
    for (int c = 1; c <= copies; ++c) names.push_back(fmt::format("xi{}", c));
  }
  if (std::holds_alternative<ProductMeasurement>(measurement)) {
    names.insert(names.end(), kAnalysisInputs.begin(), kAnalysisInputs.end());
  }
  return names;
}

void Scenario::validate() const {
  std::vector<std::string> problems;
  if (copies < 1) problems.push_back("copies must be positive");
  if (const auto* povm = std::get_if<Povm>(&measurement)) {
    const int dim = 1 << std::max(copies, 0);
    if (povm->dim() != dim) {
      problems.push_back(fmt::format("POVM dimension {} does not match {} copies", povm->dim(), copies));
    }
  } else if (copies != 2) {
    problems.push_back("product measurement needs copies = 2");
  }
  std::set<std::string> seen;
  for (const auto& f : free_inputs) {
    if (!seen.insert(f).second) problems.push_back("free input '" + f + "' listed twice");
    if (fixed.count(f)) problems.push_back("input '" + f + "' is both free and fixed");
    if (f == "delta") problems.push_back("delta cannot be a free input");
  }
  const auto required = required_inputs();
  for (const auto& r : required) {
    if (!has_input(*this, r)) problems.push_back("input '" + r + "' is neither free nor fixed");
  }
  for (const auto& f : free_inputs) {
    if (std::find(required.begin(), required.end(), f) == required.end()) {
      problems.push_back("free input '" + f + "' is not used by this scenario");
    }
  }
  if (has_input(*this, "xi")) {
    for (int c = 1; c <= copies; ++c) {
      if (has_input(*this, fmt::format("xi{}", c))) {
        problems.push_back(fmt::format("xi and xi{} are both given", c));
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid scenario:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw std::invalid_argument(msg);
  }
}

KappaEvaluation evaluate_scenario(const Scenario& scenario, const Settings& free_values) {
  ProbeFamily family{scenario.kind, {}, scenario.fd_step};
  const bool shared = has_input(scenario, "xi");
  for (int c = 1; c <= scenario.copies; ++c) {
    family.input_phases.push_back(
        lookup(scenario.fixed, free_values, shared ? std::string("xi") : fmt::format("xi{}", c)));
  }
  std::vector<double> params;
  for (const auto& name : parameter_inputs(scenario.kind)) {
    params.push_back(lookup(scenario.fixed, free_values, name));
  }
  if (const auto* povm = std::get_if<Povm>(&scenario.measurement)) {
    return evaluate_kappa(family, params, *povm);
  }
  const AnalysisBasis first{lookup(scenario.fixed, free_values, "theta1"),
                            lookup(scenario.fixed, free_values, "alpha1")};
  const AnalysisBasis second{lookup(scenario.fixed, free_values, "theta2"),
                             lookup(scenario.fixed, free_values, "alpha2")};
  return evaluate_kappa(family, params, product_projective_povm(first, second));
}

OptimizeResult optimize_kappa(const Scenario& scenario, const OptimizeOptions& options) {
  if (options.budget < 1) throw std::invalid_argument("optimisation budget must be at least 1");
  scenario.validate();
  const std::size_t dims = scenario.free_inputs.size();

  OptimizeResult result;
  std::vector<double> best_x(dims, 0.0);
  double best_kappa = -std::numeric_limits<double>::infinity();

  auto to_settings = [&](const std::vector<double>& x) {
    Settings s;
    for (std::size_t d = 0; d < dims; ++d) s[scenario.free_inputs[d]] = x[d];
    return s;
  };
  auto evaluate = [&](const std::vector<double>& x) {
    EvalOutcome out;
    ++result.evaluations;
    try {
      const KappaEvaluation e = evaluate_scenario(scenario, to_settings(x));
      out.ok = std::isfinite(e.kappa.kappa);
      out.kappa = out.ok ? e.kappa.kappa : out.kappa;
      out.singular = e.fisher.singular;
      if (!out.ok) out.error = "non-finite kappa";
    } catch (const std::invalid_argument& ex) {
      out.error = ex.what();
    }
    return out;
  };

  // Coarse grid, reduced when the full 17^d grid would exceed the budget.
  int g = std::max(1, options.grid_points);
  while (g > 1 && std::pow(static_cast<double>(g), static_cast<double>(dims)) > options.budget) --g;
  result.grid_points_per_dim = g;
  const double spacing = kTwoPi / g;
  std::size_t total = 1;
  for (std::size_t d = 0; d < dims; ++d) total *= static_cast<std::size_t>(g);

  int usable = 0;
  std::string first_error;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::vector<double> x(dims);
    std::size_t rem = idx;
    for (std::size_t d = 0; d < dims; ++d) {
      x[d] = spacing * static_cast<double>(rem % g);
      rem /= g;
    }
    const EvalOutcome e = evaluate(x);
    if (!e.ok) {
      if (first_error.empty()) first_error = e.error;
      continue;
    }
    if (!e.singular) ++usable;
    if (e.kappa > best_kappa) {
      best_kappa = e.kappa;
      best_x = x;
    }
  }
  if (usable == 0) {
    throw std::runtime_error(fmt::format(
        "kappa optimisation failed: no grid point with a regular Fisher matrix ({} points{}{})",
        total, first_error.empty() ? "" : ", first error: ", first_error));
  }

  // Nelder-Mead on -kappa with the remaining budget.
  if (dims > 0 && result.evaluations < options.budget) {
    std::vector<std::vector<double>> simplex{best_x};
    std::vector<double> values{best_kappa};
    for (std::size_t d = 0; d < dims && result.evaluations < options.budget; ++d) {
      std::vector<double> x = best_x;
      x[d] += 0.5 * spacing;
      const EvalOutcome e = evaluate(x);
      simplex.push_back(x);
      values.push_back(e.ok ? e.kappa : -std::numeric_limits<double>::infinity());
    }
    auto centroid_of = [&](std::size_t skip) {
      std::vector<double> c(dims, 0.0);
      for (std::size_t v = 0; v < simplex.size(); ++v) {
        if (v == skip) continue;
        for (std::size_t d = 0; d < dims; ++d) c[d] += simplex[v][d] / static_cast<double>(dims);
      }
      return c;
    };
    auto along = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
      std::vector<double> x(dims);
      for (std::size_t d = 0; d < dims; ++d) x[d] = c[d] + t * (w[d] - c[d]);
      return x;
    };
    auto value_of = [&](const std::vector<double>& x) {
      const EvalOutcome e = evaluate(x);
      return e.ok ? e.kappa : -std::numeric_limits<double>::infinity();
    };

    while (simplex.size() == dims + 1 && result.evaluations < options.budget) {
      std::vector<std::size_t> order(simplex.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
      const std::size_t top = order.front();
      const std::size_t worst = order.back();
      const std::size_t second_worst = order[order.size() - 2];

      double size = 0.0;
      for (std::size_t v = 0; v < simplex.size(); ++v) {
        for (std::size_t d = 0; d < dims; ++d) {
          size = std::max(size, std::abs(simplex[v][d] - simplex[top][d]));
        }
      }
      if (size < 1e-10 || (std::isfinite(values[worst]) && values[top] - values[worst] < 1e-14)) break;

      const auto c = centroid_of(worst);
      const auto reflected = along(c, simplex[worst], -1.0);
      const double f_r = value_of(reflected);
      if (f_r > values[top]) {
        if (result.evaluations >= options.budget) {
          simplex[worst] = reflected, values[worst] = f_r;
          break;
        }
        const auto expanded = along(c, simplex[worst], -2.0);
        const double f_e = value_of(expanded);
        if (f_e > f_r) {
          simplex[worst] = expanded, values[worst] = f_e;
        } else {
          simplex[worst] = reflected, values[worst] = f_r;
        }
      } else if (f_r > values[second_worst]) {
        simplex[worst] = reflected, values[worst] = f_r;
      } else {
        if (result.evaluations >= options.budget) break;
        const bool outside = f_r > values[worst];
        const auto contracted = along(c, outside ? reflected : simplex[worst], 0.5);
        const double f_c = value_of(contracted);
        if (f_c > std::max(f_r, values[worst]) || (outside && f_c >= f_r)) {
          simplex[worst] = contracted, values[worst] = f_c;
        } else {
          for (std::size_t v = 0; v < simplex.size() && result.evaluations < options.budget; ++v) {
            if (v == top) continue;
            simplex[v] = along(simplex[top], simplex[v], 0.5);
            values[v] = value_of(simplex[v]);
          }
        }
      }
    }
    for (std::size_t v = 0; v < simplex.size(); ++v) {
      if (values[v] > best_kappa) {
        best_kappa = values[v];
        best_x = simplex[v];
      }
    }
  }

  for (auto& x : best_x) x = wrap_angle(x);
  result.settings = to_settings(best_x);
  const KappaEvaluation best = evaluate_scenario(scenario, result.settings);
  result.best = best.kappa;
  result.fisher = best.fisher;
  return result;
}

KappaCurve kappa_scan(const Scenario& scenario, const std::vector<double>& grid,
                      const OptimizeOptions& options, const std::string& variable) {
  if (grid.empty()) throw std::invalid_argument("scan grid is empty");
  const bool increasing = grid.size() < 2 || grid[1] > grid[0];
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (increasing ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1])) {
      throw std::invalid_argument("scan grid must be strictly monotone");
    }
  }
  if (std::find(scenario.free_inputs.begin(), scenario.free_inputs.end(), variable) !=
      scenario.free_inputs.end()) {
    throw std::invalid_argument("scan variable '" + variable + "' is also a free input");
  }

  const std::size_t n = grid.size();
  KappaCurve curve;
  curve.variable = variable;
  curve.grid = grid;
  curve.kappa_values.assign(n, std::numeric_limits<double>::quiet_NaN());
  curve.per_parameter.assign(n, {});
  curve.best_settings.assign(n, {});
  curve.failed.assign(n, false);
  curve.errors.assign(n, {});
  parallel_for(n, [&](std::size_t i) {
    Scenario point = scenario;
    point.fixed[variable] = grid[i];
    try {
      const OptimizeResult r = optimize_kappa(point, options);
      curve.kappa_values[i] = r.best.kappa;
      curve.per_parameter[i] = r.best.per_parameter;
      curve.best_settings[i] = r.settings;
    } catch (const std::exception& e) {
      curve.failed[i] = true;
      curve.errors[i] = e.what();
      curve.per_parameter[i].assign(2, std::numeric_limits<double>::quiet_NaN());
    }
  });
  return curve;
}

std::vector<double> log_spaced_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) {
    throw std::invalid_argument("log grid needs 0 < lo < hi and at least two points");
  }
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (points - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::string curve_to_csv(const KappaCurve& curve, const std::vector<std::string>& parameter_names) {
  std::vector<std::string> setting_names;
  for (const auto& s : curve.best_settings) {
    for (const auto& [k, v] : s) {
      if (std::find(setting_names.begin(), setting_names.end(), k) == setting_names.end()) {
        setting_names.push_back(k);
      }
    }
  }
  std::string out = curve.variable + ",kappa";
  for (const auto& p : parameter_names) out += ",contrib_" + p;
  for (const auto& s : setting_names) out += ",best_" + s;
  out += "\n";
  auto num = [](double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string("nan"); };
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    out += num(curve.grid[i]) + "," + num(curve.kappa_values[i]);
    for (std::size_t p = 0; p < parameter_names.size(); ++p) {
      const auto& pp = curve.per_parameter[i];
      out += "," + num(p < pp.size() ? pp[p] : std::numeric_limits<double>::quiet_NaN());
    }
    for (const auto& s : setting_names) {
      const auto it = curve.best_settings[i].find(s);
      out += "," + num(it == curve.best_settings[i].end() ? std::numeric_limits<double>::quiet_NaN()
                                                         : it->second);
    }
    out += "\n";
  }
  return out;
}

ComplexMatrix haar_unitary(int dim, std::mt19937_64& rng) {
  if (dim < 1) throw std::invalid_argument("unitary dimension must be positive");
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(2.0));
  ComplexMatrix z(dim, dim);
  for (int c = 0; c < dim; ++c) {
    for (int r = 0; r < dim; ++r) z(r, c) = Complex(gauss(rng), gauss(rng));
  }
  Eigen::HouseholderQR<ComplexMatrix> qr(z);
  ComplexMatrix q = qr.householderQ();
  const ComplexMatrix& packed = qr.matrixQR();
  for (int i = 0; i < dim; ++i) {
    const Complex rii = packed(i, i);
    const double mag = std::abs(rii);
    if (mag > 0.0) q.col(i) *= rii / mag;
  }
  return q;
}

Povm basis_povm(const ComplexMatrix& unitary) {
  std::vector<PovmOutcome> outcomes;
  for (Eigen::Index c = 0; c < unitary.cols(); ++c) {
    const ComplexVector v = unitary.col(c);
    outcomes.push_back({fmt::format("b{}", c), v * v.adjoint()});
  }
  return Povm(std::move(outcomes));
}

CollectiveSearchResult random_collective_search(int trials, std::uint64_t seed,
                                                const CollectiveSearchOptions& options) {
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  const auto n = static_cast<std::size_t>(trials);
  std::vector<ComplexMatrix> unitaries(n);
  std::vector<OptimizeResult> results(n);
  std::vector<std::string> errors(n);
  parallel_for(n, [&](std::size_t t) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(t)};
    std::mt19937_64 rng(seq);
    unitaries[t] = haar_unitary(4, rng);
    Scenario s;
    s.kind = FamilyKind::TwoPhase;
    s.copies = 2;
    s.measurement = basis_povm(unitaries[t]);
    s.free_inputs = options.free_inputs;
    for (const auto& [name, value] : Settings{{"phi_y", options.phi_y}, {"phi_z", options.phi_z}}) {
      if (std::find(s.free_inputs.begin(), s.free_inputs.end(), name) == s.free_inputs.end()) {
        s.fixed[name] = value;
      }
    }
    try {
      results[t] = optimize_kappa(s, options.per_trial);
    } catch (const std::runtime_error& e) {
      // Every grid point singular: this measurement carries no joint information.
      results[t].best.kappa = 0.0;
      errors[t] = e.what();
    }
  });

  CollectiveSearchResult out;
  out.trial_kappas.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double k = results[t].best.kappa;
    out.trial_kappas.push_back(k);
    if (out.best_trial < 0 || k > out.max_kappa) {
      out.max_kappa = k;
      out.best_trial = static_cast<int>(t);
      out.best_settings = results[t].settings;
      out.best_unitary = unitaries[t];
    }
  }
  return out;
}

}  // namespace qmetro
