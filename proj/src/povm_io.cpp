#include "qmetro/povm_io.hpp"

#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace qmetro {

using nlohmann::json;

std::string povm_to_json(const Povm& povm) {
  json doc;
  doc["dim"] = povm.dim();
  doc["basis"] = std::string(kPovmBasisNote);
  doc["outcomes"] = json::array();
  for (const auto& o : povm.outcomes()) {
    json re = json::array();
    json im = json::array();
    for (Eigen::Index r = 0; r < o.element.rows(); ++r) {
      json re_row = json::array();
      json im_row = json::array();
      for (Eigen::Index c = 0; c < o.element.cols(); ++c) {
        re_row.push_back(o.element(r, c).real());
        im_row.push_back(o.element(r, c).imag());
      }
      re.push_back(std::move(re_row));
      im.push_back(std::move(im_row));
    }
    doc["outcomes"].push_back({{"label", o.label}, {"re", std::move(re)}, {"im", std::move(im)}});
  }
  return doc.dump(2) + "\n";
}

namespace {

RealMatrix read_block(const json& rows, int dim, const std::string& what) {
  if (!rows.is_array() || static_cast<int>(rows.size()) != dim) {
    throw std::invalid_argument(what + " must be a " + std::to_string(dim) + "-row array");
  }
  RealMatrix m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const json& row = rows[r];
    if (!row.is_array() || static_cast<int>(row.size()) != dim) {
      throw std::invalid_argument(what + " row " + std::to_string(r) + " has wrong length");
    }
    for (int c = 0; c < dim; ++c) {
      if (!row[c].is_number()) throw std::invalid_argument(what + " has a non-numeric entry");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

}  // namespace

Povm povm_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("POVM JSON parse error: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("dim") || !doc.contains("outcomes")) {
    throw std::invalid_argument("POVM JSON needs 'dim' and 'outcomes'");
  }
  if (!doc["dim"].is_number_integer() || doc["dim"].get<int>() < 1) {
    throw std::invalid_argument("POVM 'dim' must be a positive integer");
  }
  const int dim = doc["dim"].get<int>();
  std::vector<PovmOutcome> outcomes;
  for (const json& o : doc["outcomes"]) {
    if (!o.contains("label") || !o["label"].is_string() || !o.contains("re") || !o.contains("im")) {
      throw std::invalid_argument("each POVM outcome needs 'label', 're' and 'im'");
    }
    const std::string label = o["label"].get<std::string>();
    const RealMatrix re = read_block(o["re"], dim, "outcome '" + label + "' re");
    const RealMatrix im = read_block(o["im"], dim, "outcome '" + label + "' im");
    ComplexMatrix element(dim, dim);
    element.real() = re;
    element.imag() = im;
    outcomes.push_back({label, std::move(element)});
  }
  return Povm(std::move(outcomes));
}

}  // namespace qmetro
