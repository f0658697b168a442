#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qmetro {

enum class ValueType { Integer, Real, Boolean, String, Choice, List };

struct ConfigKey {
  std::string name;
  std::string section;
  ValueType type = ValueType::String;
  std::optional<std::string> default_value;
  std::vector<std::string> choices;
  std::optional<double> min;
  std::optional<double> max;
  std::string help;
};

/// Every accepted key, grouped by section.
const std::vector<ConfigKey>& config_schema();

inline const std::vector<std::string> kCommands{
    "qfi",      "weak-comm",       "kappa-scan",        "optimize",
    "tomography", "simulate-counts", "conjecture-search", "gate-model"};

/// Keys that must be set explicitly for a command.
std::vector<std::string> required_keys(const std::string& command);

struct RunConfig {
  std::string command;
  /// Explicitly set keys, after overrides; typed access falls back to defaults.
  std::map<std::string, std::string> values;
  std::vector<std::string> input_paths;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get_string(const std::string& key) const;
  double get_real(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  /// Every schema key with its effective value (explicit or default).
  std::map<std::string, std::string> resolved() const;
};

struct ConfigParseResult {
  std::optional<RunConfig> config;
  /// All problems found; empty iff `config` is set.
  std::vector<std::string> errors;
};

/// Parses an INI-style document (`key = value`, `[section]` headers, `;` or
/// `#` comments) and applies `overrides` on top. Reports every problem rather
/// than stopping at the first.
ConfigParseResult parse_config(std::string_view text,
                               const std::map<std::string, std::string>& overrides = {});

/// Closest schema key by edit distance.
std::string nearest_key(std::string_view name);

}  // namespace qmetro
