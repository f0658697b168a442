#pragma once

#include <string>
#include <vector>

#include "qmetro/config.hpp"

namespace qmetro {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunReport {
  int exit_code = 0;
  /// Paths written, manifest last.
  std::vector<std::string> artifacts;
  /// Machine-readable status document (also printed by the CLI).
  std::string status_json;
};

/// Executes a validated configuration. Every file is written through a
/// temporary and renamed into place; a failed run leaves no partial outputs.
/// Always writes manifest.json, including wall time.
RunReport run(const RunConfig& config);

/// Machine-readable error document for configuration failures.
std::string error_json(const std::string& command, const std::vector<std::string>& errors);

}  // namespace qmetro
