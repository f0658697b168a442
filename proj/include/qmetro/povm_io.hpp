#pragma once

#include <string>
#include <string_view>

#include "qmetro/measurement.hpp"

namespace qmetro {

/// Basis note written into every POVM file.
inline constexpr std::string_view kPovmBasisNote = "logical |00>,|01>,|10>,|11>; qubit1 slow";

/// POVM JSON document: {"dim", "basis", "outcomes": [{"label", "re", "im"}]}.
/// Numbers use the shortest decimal form that round-trips to the same double.
std::string povm_to_json(const Povm& povm);

/// Parses a POVM JSON document. Throws std::invalid_argument on schema errors.
Povm povm_from_json(std::string_view text);

}  // namespace qmetro
