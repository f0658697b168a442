#include "qmetro/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/core.h>
#include <json.hpp>

#include "qmetro/fisher.hpp"
#include "qmetro/measurement.hpp"
#include "qmetro/optimizer.hpp"
#include "qmetro/povm_io.hpp"
#include "qmetro/quantum_core.hpp"
#include "qmetro/tomography.hpp"

namespace qmetro {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Collects artifacts in memory; nothing touches disk until commit().
class ArtifactWriter {
 public:
  ArtifactWriter(fs::path dir, std::vector<std::string> inputs)
      : dir_(std::move(dir)), inputs_(std::move(inputs)) {}

  void add(const std::string& name, std::string content) {
    pending_.emplace_back(name, std::move(content));
  }

  std::vector<std::string> commit() {
    fs::create_directories(dir_);
    for (const auto& [name, _] : pending_) {
      const fs::path target = dir_ / name;
      for (const auto& in : inputs_) {
        std::error_code ec;
        if (fs::exists(in) && fs::exists(target) && fs::equivalent(in, target, ec)) {
          throw std::runtime_error("refusing to overwrite input file '" + in + "'");
        }
      }
    }
    std::vector<std::string> written;
    for (const auto& [name, content] : pending_) {
      const fs::path target = dir_ / name;
      const fs::path tmp = dir_ / ("." + name + ".tmp");
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.close();
        if (!out) {
          std::error_code ec;
          fs::remove(tmp, ec);
          throw std::runtime_error("cannot write '" + tmp.string() + "'");
        }
      }
      fs::rename(tmp, target);
      written.push_back(target.string());
    }
    return written;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& [name, _] : pending_) n.push_back(name);
    return n;
  }

 private:
  fs::path dir_;
  std::vector<std::string> inputs_;
  std::vector<std::pair<std::string, std::string>> pending_;
};

json matrix_json(const RealMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json settings_json(const Settings& s) {
  json out = json::object();
  for (const auto& [k, v] : s) out[k] = v;
  return out;
}

FamilyKind family_of(const RunConfig& cfg) { return family_kind_from_string(cfg.get_string("family")); }

ProbeFamily build_family(const RunConfig& cfg) {
  ProbeFamily family{family_of(cfg), {}};
  const int copies = static_cast<int>(cfg.get_int("copies"));
  for (int c = 1; c <= copies; ++c) {
    family.input_phases.push_back(cfg.has("xi") ? cfg.get_real("xi")
                                                : cfg.get_real(fmt::format("xi{}", c)));
  }
  return family;
}

std::vector<double> build_params(const RunConfig& cfg) {
  if (family_of(cfg) == FamilyKind::PhaseDephasing) return {cfg.get_real("phi"), cfg.get_real("delta")};
  return {cfg.get_real("phi_y"), cfg.get_real("phi_z")};
}

GateModel build_gate(const RunConfig& cfg) {
  return {cfg.get_real("t_h"), cfg.get_real("t_v"), cfg.get_real("visibility"),
          cfg.get_bool("compensated")};
}

/// The measurement as a fixed POVM; product analysis angles must all be set.
Povm build_povm(const RunConfig& cfg) {
  const std::string m = cfg.get_string("measurement");
  if (m == "bell") return bell_povm();
  if (m == "gate") return cs_gate_povm(build_gate(cfg)).povm;
  if (m == "single") return single_qubit_projective_povm({cfg.get_real("theta1"), cfg.get_real("alpha1")});
  if (m == "povm-file") return povm_from_json(read_file(cfg.get_string("povm")));
  for (const char* k : {"theta1", "alpha1", "theta2", "alpha2"}) {
    if (!cfg.has(k)) throw std::invalid_argument(fmt::format("product measurement needs '{}' here", k));
  }
  return product_projective_povm({cfg.get_real("theta1"), cfg.get_real("alpha1")},
                                 {cfg.get_real("theta2"), cfg.get_real("alpha2")});
}

Scenario build_scenario(const RunConfig& cfg) {
  Scenario s;
  s.kind = family_of(cfg);
  s.copies = static_cast<int>(cfg.get_int("copies"));
  const bool product = cfg.get_string("measurement") == "product";
  const std::vector<std::string> angles{"theta1", "alpha1", "theta2", "alpha2"};
  if (product) {
    s.measurement = ProductMeasurement{};
  } else {
    s.measurement = build_povm(cfg);
  }

  if (cfg.has("free")) {
    s.free_inputs = cfg.get_list("free");
  } else {
    // The first copy's phase is a global reference for phase-dephasing.
    if (s.kind == FamilyKind::PhaseDephasing) {
      s.free_inputs = s.copies >= 2 && !cfg.has("xi") ? std::vector<std::string>{"phi", "xi2"}
                                                      : std::vector<std::string>{"phi"};
    } else if (!cfg.has("xi")) {
      s.free_inputs = {"xi"};
    }
    if (product) {
      for (const auto& a : angles) {
        if (!cfg.has(a)) s.free_inputs.push_back(a);
      }
    }
  }
  const bool shared = cfg.has("xi") ||
                      std::find(s.free_inputs.begin(), s.free_inputs.end(), "xi") != s.free_inputs.end();
  std::vector<std::string> names = s.kind == FamilyKind::PhaseDephasing
                                       ? std::vector<std::string>{"phi", "delta"}
                                       : std::vector<std::string>{"phi_y", "phi_z"};
  if (shared) {
    names.push_back("xi");
  } else {
    for (int c = 1; c <= s.copies; ++c) names.push_back(fmt::format("xi{}", c));
  }
  if (product) names.insert(names.end(), angles.begin(), angles.end());
  for (const auto& n : names) {
    if (std::find(s.free_inputs.begin(), s.free_inputs.end(), n) != s.free_inputs.end()) continue;
    if (n == "xi" && !cfg.has("xi")) {
      s.fixed[n] = 0.0;
    } else {
      s.fixed[n] = cfg.get_real(n);
    }
  }
  return s;
}

OptimizeOptions build_optimize_options(const RunConfig& cfg) {
  return {static_cast<int>(cfg.get_int("budget")), static_cast<int>(cfg.get_int("grid_points"))};
}

void cmd_qfi(const RunConfig& cfg, ArtifactWriter& out, json& summary) {
  const ProbeFamily family = build_family(cfg);
  const auto params = build_params(cfg);
  const StateWithDerivatives swd = probe_with_derivatives(family, params);
  const SldSet slds = sld_operators(swd);
  const RealMatrix h = qfi_matrix(swd, slds);
  json doc;
  doc["family"] = to_string(family.kind);
  doc["copies"] = family.copies();
  doc["input_phases"] = family.input_phases;
  doc["parameter_names"] = family.parameter_names();
  doc["parameters"] = params;
  doc["qfi"] = matrix_json(h);
  doc["qfi_determinant"] = h.determinant();
  doc["single_copy_qfi_diagonal"] = single_copy_qfi_diagonal(family, params);
  doc["weak_commutativity"] = weak_commutativity(swd, slds, 0, 1);
  summary["qfi"] = doc["qfi"];
  out.add("qfi.json", doc.dump(2) + "\n");
}

void cmd_weak_comm(const RunConfig& cfg, ArtifactWriter& out, json& summary) {
  const ProbeFamily family = build_family(cfg);
  const auto params = build_params(cfg);
  const StateWithDerivatives swd = probe_with_derivatives(family, params);
  const SldSet slds = sld_operators(swd);
  json doc;
  doc["family"] = to_string(family.kind);
  doc["copies"] = family.copies();
  doc["parameters"] = params;
  doc["weak_commutativity"] = weak_commutativity(swd, slds, 0, 1);
  doc["qfi_determinant"] = qfi_matrix(swd, slds).determinant();
  if (family.kind == FamilyKind::TwoPhase) {
    const auto root = find_commuting_phase(params[0], params[1]);
    if (root) {
      const StateWithDerivatives at = single_copy_probe(FamilyKind::TwoPhase, *root, params);
      doc["commuting_phase"] = *root;
      doc["qfi_determinant_at_commuting_phase"] = qfi_matrix(at, sld_operators(at)).determinant();
    } else {
      doc["commuting_phase"] = nullptr;
    }
  }
  summary["weak_commutativity"] = doc["weak_commutativity"];
  out.add("weak_comm.json", doc.dump(2) + "\n");
}

void cmd_kappa_scan(const RunConfig& cfg, ArtifactWriter& out, json& summary) {
  const Scenario scenario = build_scenario(cfg);
  const double lo = cfg.get_real("scan_min");
  const double hi = cfg.get_real("scan_max");
  const int points = static_cast<int>(cfg.get_int("points"));
  std::vector<double> grid;
  if (cfg.get_string("spacing") == "log") {
    grid = log_spaced_grid(lo, hi, points);
  } else {
    for (int i = 0; i < points; ++i) grid.push_back(lo + (hi - lo) * i / (points - 1));
  }
  const KappaCurve curve =
      kappa_scan(scenario, grid, build_optimize_options(cfg), cfg.get_string("scan_variable"));
  ProbeFamily family{scenario.kind, {0.0}};
  out.add("curve.csv", curve_to_csv(curve, family.parameter_names()));
  const auto failed = std::count(curve.failed.begin(), curve.failed.end(), true);
  summary["points"] = curve.grid.size();
  summary["failed_points"] = failed;
  double best = 0.0;
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    if (!curve.failed[i]) best = std::max(best, curve.kappa_values[i]);
  }
  summary["max_kappa"] = best;
}

void cmd_optimize(const RunConfig& cfg, ArtifactWriter& out, json& summary) {
  const Scenario scenario = build_scenario(cfg);
  const OptimizeResult r = optimize_kappa(scenario, build_optimize_options(cfg));
  json doc;
  doc["kappa"] = r.best.kappa;
  doc["per_parameter"] = r.best.per_parameter;
  doc["copies"] = r.best.copies;
  doc["partial"] = r.best.partial;
  doc["settings"] = settings_json(r.settings);
  doc["fixed"] = settings_json(scenario.fixed);
  doc["evaluations"] = r.evaluations;
  doc["classical_fi"] = matrix_json(r.fisher.classical_fi);
  doc["singular"] = r.fisher.singular;
  doc["boundary"] = r.fisher.boundary;
  doc["dropped_outcomes"] = r.fisher.dropped_outcomes;
  summary["kappa"] = r.best.kappa;
  out.add("optimize.json", doc.dump(2) + "\n");
}

void cmd_simulate_counts(const RunConfig& cfg, ArtifactWriter& out, json& summary) {
  const Povm povm = build_povm(cfg);
  const CountsTable table = simulate_counts(povm, reference_states(), cfg.get_real("exposure"), cfg.seed);
  summary["total_counts"] = table.counts.sum();
  out.add("counts.csv", counts_to_csv(table));
}

void cmd_tomography(const RunConfig& cfg, ArtifactWriter& out, json& summary) {
  const ReferenceSet refs = reference_states();
  const CountsTable counts = counts_from_csv(read_file(cfg.get_string("counts")), refs);
  const MleOptions options{static_cast<int>(cfg.get_int("max_iters")), cfg.get_real("tol")};
  const MleResult mle = mle_reconstruct(counts, refs, options);
  const PovmValidation v = validate_povm(mle.povm);

  json doc;
  doc["converged"] = mle.converged;
  doc["iterations"] = mle.iterations;
  doc["log_likelihood"] = mle.log_likelihood;
  doc["floored_events"] = mle.floored_events;
  doc["validation"] = {{"max_hermiticity_violation", v.max_hermiticity_violation},
                       {"min_eigenvalue", v.min_eigenvalue},
                       {"completeness_residual", v.completeness_residual},
                       {"passed", v.passed}};
  doc["gram_rank"] = refs.gram_rank;
  doc["gram_condition"] = refs.gram_condition;

  const Povm ideal = build_povm(cfg);
  json fid = json::object();
  for (const auto& o : mle.povm.outcomes()) {
    const auto labels = ideal.labels();
    if (std::find(labels.begin(), labels.end(), o.label) == labels.end()) continue;
    fid[o.label] = povm_fidelity(o.element, ideal[ideal.index_of(o.label)].element);
  }
  doc["fidelity_to_" + cfg.get_string("measurement")] = fid;

  if (const int runs = static_cast<int>(cfg.get_int("mc_runs")); runs >= 2) {
    // kappa of the reconstructed detector on the configured two-copy probe.
    ProbeFamily family = build_family(cfg);
    const auto params = build_params(cfg);
    auto derived = [&](const CountsTable& resampled) {
      const MleResult r = mle_reconstruct(resampled, refs, options);
      return evaluate_kappa(family, params, r.povm).kappa.kappa;
    };
    const MonteCarloSummary mc = monte_carlo_uncertainty(counts, derived, runs, cfg.seed);
    doc["monte_carlo"] = {{"quantity", "kappa"},     {"runs", mc.runs},
                          {"failed_runs", mc.failed_runs}, {"mean", mc.mean},
                          {"standard_deviation", mc.standard_deviation}};
    doc["kappa"] = evaluate_kappa(family, params, mle.povm).kappa.kappa;
  }
  summary["converged"] = mle.converged;
  summary["validation_passed"] = v.passed;
  out.add("reconstructed_povm.json", povm_to_json(mle.povm));
  out.add("tomography.json", doc.dump(2) + "\n");
}

void cmd_conjecture_search(const RunConfig& cfg, ArtifactWriter& out, json& summary) {
  CollectiveSearchOptions options;
  options.phi_y = cfg.get_real("phi_y");
  options.phi_z = cfg.get_real("phi_z");
  if (cfg.has("free")) options.free_inputs = cfg.get_list("free");
  options.per_trial = {static_cast<int>(cfg.get_int("trial_budget")),
                       static_cast<int>(cfg.get_int("grid_points"))};
  const int trials = static_cast<int>(cfg.get_int("trials"));
  const CollectiveSearchResult r = random_collective_search(trials, cfg.seed, options);
  json doc;
  doc["trials"] = trials;
  doc["max_kappa"] = r.max_kappa;
  doc["best_trial"] = r.best_trial;
  doc["best_settings"] = settings_json(r.best_settings);
  doc["single_copy_bound_holds"] = r.max_kappa <= 1.0 + 1e-6;
  summary["max_kappa"] = r.max_kappa;
  out.add("conjecture.json", doc.dump(2) + "\n");
}

void cmd_gate_model(const RunConfig& cfg, ArtifactWriter& out, json& summary) {
  const GateModel model = build_gate(cfg);
  const GatePovm gate = cs_gate_povm(model);
  const PovmValidation v = validate_povm(gate.povm);
  json doc;
  doc["model"] = {{"t_h", model.t_h},
                  {"t_v", model.t_v},
                  {"visibility", model.visibility},
                  {"compensated", model.compensated}};
  doc["amplitudes"] = {{"HH", gate.amplitudes[0]},
                       {"HV", gate.amplitudes[1]},
                       {"VH", gate.amplitudes[2]},
                       {"VV", gate.amplitudes[3]}};
  doc["success_probability"] = gate.success_probability;
  doc["validation_passed"] = v.passed;
  json fid = json::object();
  const Povm bell = bell_povm();
  for (std::size_t k = 0; k < bell.size(); ++k) {
    fid[bell[k].label] = povm_fidelity(gate.povm[k].element, bell[k].element);
  }
  doc["fidelity_to_bell"] = fid;
  summary["validation_passed"] = v.passed;
  out.add("gate_povm.json", povm_to_json(gate.povm));
  out.add("gate_model.json", doc.dump(2) + "\n");
}

}  // namespace

std::string error_json(const std::string& command, const std::vector<std::string>& errors) {
  json doc;
  doc["status"] = "error";
  doc["command"] = command;
  doc["errors"] = errors;
  return doc.dump();
}

RunReport run(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  ArtifactWriter out(config.output_dir, config.input_paths);
  json summary = json::object();
  try {
    const std::string& c = config.command;
    if (c == "qfi") {
      cmd_qfi(config, out, summary);
    } else if (c == "weak-comm") {
      cmd_weak_comm(config, out, summary);
    } else if (c == "kappa-scan") {
      cmd_kappa_scan(config, out, summary);
    } else if (c == "optimize") {
      cmd_optimize(config, out, summary);
    } else if (c == "tomography") {
      cmd_tomography(config, out, summary);
    } else if (c == "simulate-counts") {
      cmd_simulate_counts(config, out, summary);
    } else if (c == "conjecture-search") {
      cmd_conjecture_search(config, out, summary);
    } else if (c == "gate-model") {
      cmd_gate_model(config, out, summary);
    } else {
      throw std::invalid_argument("unknown command '" + c + "'");
    }

    json manifest;
    manifest["tool"] = "qmetro";
    manifest["version"] = kToolVersion;
    manifest["eigen_version"] = fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                                            EIGEN_MINOR_VERSION);
    manifest["command"] = config.command;
    manifest["seed"] = config.seed;
    json echo = json::object();
    for (const auto& [k, v] : config.resolved()) echo[k] = v;
    manifest["config"] = echo;
    manifest["artifacts"] = out.names();
    manifest["summary"] = summary;
    if (config.command == "kappa-scan" || config.command == "optimize") {
      manifest["assumptions"] = {
          "kappa denominator is the single-copy QFI diagonal; m-copy Fisher information is divided by m",
          "measurement 'bell' is the ideal Bell projection on two copies"};
    }
    manifest["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.add("manifest.json", manifest.dump(2) + "\n");
    report.artifacts = out.commit();

    json status;
    status["status"] = "ok";
    status["command"] = config.command;
    status["artifacts"] = report.artifacts;
    status["summary"] = summary;
    report.status_json = status.dump();
    report.exit_code = 0;
  } catch (const std::exception& e) {
    report.exit_code = 1;
    report.status_json = error_json(config.command, {e.what()});
  }
  return report;
}

}  // namespace qmetro
