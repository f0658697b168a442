#include "qmetro/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/core.h>

namespace qmetro {

namespace {

ConfigKey key(std::string name, std::string section, ValueType type,
              std::optional<std::string> def, std::string help) {
  ConfigKey k;
  k.name = std::move(name);
  k.section = std::move(section);
  k.type = type;
  k.default_value = std::move(def);
  k.help = std::move(help);
  return k;
}

ConfigKey ranged(ConfigKey k, std::optional<double> lo, std::optional<double> hi) {
  k.min = lo;
  k.max = hi;
  return k;
}

ConfigKey choice(ConfigKey k, std::vector<std::string> choices) {
  k.type = ValueType::Choice;
  k.choices = std::move(choices);
  return k;
}

std::vector<ConfigKey> build_schema() {
  using V = ValueType;
  const std::vector<std::string> measurements{"bell", "gate", "product", "single", "povm-file"};
  return {
      choice(key("command", "run", V::Choice, std::nullopt, "command to run"), kCommands),
      ranged(key("seed", "run", V::Integer, "1", "random seed"), 0.0, std::nullopt),
      key("out", "run", V::String, "out", "output directory"),

      choice(key("family", "probe", V::Choice, "phase-dephasing", "probe family"),
             {"phase-dephasing", "two-phase"}),
      ranged(key("copies", "probe", V::Integer, "2", "copies measured jointly"), 1.0, 2.0),
      key("phi", "probe", V::Real, "0", "phase (phase-dephasing)"),
      ranged(key("delta", "probe", V::Real, "0.5", "dephasing strength"), 0.0, std::nullopt),
      key("phi_y", "probe", V::Real, "0", "y rotation angle (two-phase)"),
      key("phi_z", "probe", V::Real, "0", "z rotation angle (two-phase)"),
      key("xi", "probe", V::Real, std::nullopt, "input phase shared by all copies"),
      key("xi1", "probe", V::Real, "0", "input phase of copy 1"),
      key("xi2", "probe", V::Real, "0", "input phase of copy 2"),

      choice(key("measurement", "measurement", V::Choice, "bell", "measurement model"),
             measurements),
      ranged(key("visibility", "measurement", V::Real, "1", "gate interference visibility"), 0.0,
             1.0),
      ranged(key("t_h", "measurement", V::Real, "1", "PPBS amplitude transmittivity for H"), 0.0,
             1.0),
      ranged(key("t_v", "measurement", V::Real, "0.57735026918962573",
                 "PPBS amplitude transmittivity for V"),
             0.0, 1.0),
      key("compensated", "measurement", V::Boolean, "true", "add the rotated compensating PPBS"),
      key("theta1", "measurement", V::Real, std::nullopt, "analysis polar angle, qubit 1"),
      key("alpha1", "measurement", V::Real, std::nullopt, "analysis azimuth, qubit 1"),
      key("theta2", "measurement", V::Real, std::nullopt, "analysis polar angle, qubit 2"),
      key("alpha2", "measurement", V::Real, std::nullopt, "analysis azimuth, qubit 2"),
      key("povm", "measurement", V::String, std::nullopt, "POVM JSON file (measurement=povm-file)"),

      key("free", "optimize", V::List, std::nullopt, "comma-separated free inputs"),
      ranged(key("budget", "optimize", V::Integer, "2000", "kappa evaluations per point"), 1.0,
             std::nullopt),
      ranged(key("grid_points", "optimize", V::Integer, "17", "coarse grid points per input"), 1.0,
             std::nullopt),
      key("scan_variable", "optimize", V::String, "delta", "scanned input"),
      key("scan_min", "optimize", V::Real, "0.02", "first scan value"),
      key("scan_max", "optimize", V::Real, "3", "last scan value"),
      ranged(key("points", "optimize", V::Integer, "40", "scan points"), 2.0, std::nullopt),
      choice(key("spacing", "optimize", V::Choice, "log", "scan spacing"), {"log", "linear"}),

      key("counts", "tomography", V::String, std::nullopt, "counts CSV file"),
      ranged(key("exposure", "tomography", V::Real, "100000", "expected counts per input"), 0.0,
             std::nullopt),
      ranged(key("max_iters", "tomography", V::Integer, "5000", "MLE iteration cap"), 1.0,
             std::nullopt),
      ranged(key("tol", "tomography", V::Real, "1e-10", "relative log-likelihood tolerance"), 0.0,
             std::nullopt),
      ranged(key("mc_runs", "tomography", V::Integer, "0", "Monte Carlo resamples (0 = off)"), 0.0,
             std::nullopt),

      ranged(key("trials", "search", V::Integer, "10000", "random measurements"), 1.0,
             std::nullopt),
      ranged(key("trial_budget", "search", V::Integer, "60", "kappa evaluations per trial"), 1.0,
             std::nullopt),
  };
}

const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : config_schema()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::optional<double> parse_real(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<long long> parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<bool> parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  return std::nullopt;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

const std::vector<std::string> kInputNames{"phi",    "phi_y",  "phi_z",  "xi",     "xi1",
                                           "xi2",    "theta1", "alpha1", "theta2", "alpha2",
                                           "delta"};

std::optional<std::string> check_value(const ConfigKey& k, const std::string& v) {
  auto range_error = [&](double x) -> std::optional<std::string> {
    if ((k.min && x < *k.min) || (k.max && x > *k.max)) {
      return fmt::format("{} = {} outside [{}, {}]", k.name, v,
                         k.min ? fmt::format("{}", *k.min) : "-inf",
                         k.max ? fmt::format("{}", *k.max) : "inf");
    }
    return std::nullopt;
  };
  switch (k.type) {
    case ValueType::Integer: {
      const auto x = parse_int(v);
      if (!x) return fmt::format("{} = '{}' is not an integer", k.name, v);
      return range_error(static_cast<double>(*x));
    }
    case ValueType::Real: {
      const auto x = parse_real(v);
      if (!x) return fmt::format("{} = '{}' is not a finite number", k.name, v);
      return range_error(*x);
    }
    case ValueType::Boolean:
      if (!parse_bool(v)) return fmt::format("{} = '{}' is not a boolean", k.name, v);
      return std::nullopt;
    case ValueType::Choice:
      if (std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) {
        std::string opts;
        for (const auto& c : k.choices) opts += (opts.empty() ? "" : "|") + c;
        return fmt::format("{} = '{}' is not one of {}", k.name, v, opts);
      }
      return std::nullopt;
    case ValueType::List:
      for (const auto& item : split_list(v)) {
        if (std::find(kInputNames.begin(), kInputNames.end(), item) == kInputNames.end()) {
          return fmt::format("{}: unknown input '{}'", k.name, item);
        }
      }
      return std::nullopt;
    case ValueType::String:
      if (v.empty()) return fmt::format("{} must not be empty", k.name);
      return std::nullopt;
  }
  return std::nullopt;
}

std::string schema_summary(const std::string& command) {
  std::string s;
  for (const auto& r : required_keys(command)) s += (s.empty() ? "" : ", ") + r;
  return fmt::format("command '{}' requires: {}", command, s.empty() ? "(nothing)" : s);
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = build_schema();
  return schema;
}

std::vector<std::string> required_keys(const std::string& command) {
  if (command == "qfi" || command == "weak-comm") return {"family"};
  if (command == "kappa-scan" || command == "optimize") return {"family", "measurement"};
  if (command == "tomography") return {"counts"};
  if (command == "simulate-counts") return {"measurement", "exposure"};
  if (command == "conjecture-search") return {"trials"};
  return {};
}

std::string nearest_key(std::string_view name) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& k : config_schema()) {
    const std::size_t d = edit_distance(name, k.name);
    if (d < best_d) {
      best_d = d;
      best = k.name;
    }
  }
  return best;
}

std::string RunConfig::get_string(const std::string& k) const {
  if (auto it = values.find(k); it != values.end()) return it->second;
  const ConfigKey* schema_key = find_key(k);
  if (schema_key == nullptr) throw std::out_of_range("unknown config key '" + k + "'");
  if (!schema_key->default_value) throw std::out_of_range("config key '" + k + "' is not set");
  return *schema_key->default_value;
}

double RunConfig::get_real(const std::string& k) const {
  const auto v = parse_real(get_string(k));
  if (!v) throw std::invalid_argument("config key '" + k + "' is not a number");
  return *v;
}

long long RunConfig::get_int(const std::string& k) const {
  const auto v = parse_int(get_string(k));
  if (!v) throw std::invalid_argument("config key '" + k + "' is not an integer");
  return *v;
}

bool RunConfig::get_bool(const std::string& k) const {
  const auto v = parse_bool(get_string(k));
  if (!v) throw std::invalid_argument("config key '" + k + "' is not a boolean");
  return *v;
}

std::vector<std::string> RunConfig::get_list(const std::string& k) const {
  return split_list(get_string(k));
}

std::map<std::string, std::string> RunConfig::resolved() const {
  std::map<std::string, std::string> out;
  for (const auto& k : config_schema()) {
    if (auto it = values.find(k.name); it != values.end()) {
      out[k.name] = it->second;
    } else if (k.default_value) {
      out[k.name] = *k.default_value;
    }
  }
  return out;
}

ConfigParseResult parse_config(std::string_view text,
                               const std::map<std::string, std::string>& overrides) {
  ConfigParseResult result;
  std::map<std::string, std::string> values;

  // Boost's INI reader only knows ';' comments.
  std::string normalised;
  {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t");
      if (first != std::string::npos && line[first] == '#') line[first] = ';';
      normalised += line + "\n";
    }
  }

  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(normalised);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    result.errors.push_back(fmt::format("config line {}: {}", e.line(), e.message()));
    return result;
  }

  auto accept = [&](const std::string& section, const std::string& name, const std::string& value) {
    const ConfigKey* k = find_key(name);
    if (k == nullptr) {
      result.errors.push_back(
          fmt::format("unknown key '{}' (nearest valid key: '{}')", name, nearest_key(name)));
      return;
    }
    if (!section.empty() && section != k->section) {
      result.errors.push_back(
          fmt::format("key '{}' belongs in section [{}], found in [{}]", name, k->section, section));
      return;
    }
    values[name] = value;
  };

  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      accept("", name, node.get_value<std::string>());
      continue;
    }
    const bool known_section = std::any_of(config_schema().begin(), config_schema().end(),
                                           [&](const ConfigKey& k) { return k.section == name; });
    if (!known_section) {
      result.errors.push_back(fmt::format("unknown section [{}]", name));
      continue;
    }
    for (const auto& [child, leaf] : node) accept(name, child, leaf.get_value<std::string>());
  }
  for (const auto& [name, value] : overrides) accept("", name, value);

  for (const auto& [name, value] : values) {
    if (auto problem = check_value(*find_key(name), value)) result.errors.push_back(*problem);
  }

  RunConfig cfg;
  if (auto it = values.find("command"); it == values.end()) {
    result.errors.push_back("missing required key 'command'");
  } else {
    cfg.command = it->second;
    if (std::find(kCommands.begin(), kCommands.end(), cfg.command) != kCommands.end()) {
      for (const auto& r : required_keys(cfg.command)) {
        if (!values.count(r)) {
          result.errors.push_back(
              fmt::format("missing required key '{}' ({})", r, schema_summary(cfg.command)));
        }
      }
    }
  }
  if (auto it = values.find("measurement"); it != values.end()) {
    if (it->second == "povm-file" && !values.count("povm")) {
      result.errors.push_back("measurement = povm-file needs key 'povm'");
    }
    if (it->second == "single" && (!values.count("theta1") || !values.count("alpha1"))) {
      result.errors.push_back("measurement = single needs keys 'theta1' and 'alpha1'");
    }
  }
  if (auto it = values.find("mc_runs"); it != values.end() && it->second == "1") {
    result.errors.push_back("mc_runs must be 0 or at least 2");
  }
  if (values.count("scan_min") && values.count("scan_max") &&
      parse_real(values["scan_min"]) >= parse_real(values["scan_max"])) {
    result.errors.push_back("scan_min must be below scan_max");
  }

  if (!result.errors.empty()) return result;

  cfg.values = std::move(values);
  cfg.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  cfg.output_dir = cfg.get_string("out");
  for (const char* path_key : {"counts", "povm"}) {
    if (cfg.has(path_key)) cfg.input_paths.push_back(cfg.get_string(path_key));
  }
  result.config = std::move(cfg);
  return result;
}

}  // namespace qmetro
