#include "qmetro/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/core.h>

namespace qmetro {

namespace {

constexpr double kProbabilityFloor = 1e-12;

Complex trace_of_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a.transpose().cwiseProduct(b).sum();
}

/// Hermitian operators as real vectors (real parts then imaginary parts).
RealMatrix operator_space_matrix(const std::vector<const ComplexMatrix*>& ops) {
  if (ops.empty()) return {};
  const Eigen::Index d = ops.front()->rows();
  RealMatrix m(2 * d * d, static_cast<Eigen::Index>(ops.size()));
  for (std::size_t c = 0; c < ops.size(); ++c) {
    const ComplexMatrix& op = *ops[c];
    for (Eigen::Index i = 0; i < d * d; ++i) {
      m(i, c) = op(i % d, i / d).real();
      m(d * d + i, c) = op(i % d, i / d).imag();
    }
  }
  return m;
}

std::vector<std::size_t> match_inputs(const CountsTable& counts, const ReferenceSet& refs) {
  std::vector<std::size_t> idx;
  idx.reserve(counts.inputs.size());
  for (const auto& in : counts.inputs) idx.push_back(refs.index_of(in[0], in[1]));
  return idx;
}

double log_likelihood(const RealMatrix& n, const RealMatrix& p) {
  double ll = 0.0;
  for (Eigen::Index j = 0; j < n.rows(); ++j) {
    for (Eigen::Index k = 0; k < n.cols(); ++k) {
      if (n(j, k) > 0.0) ll += n(j, k) * std::log(std::max(p(j, k), kProbabilityFloor));
    }
  }
  return ll;
}

RealMatrix model_probabilities(const std::vector<const ComplexMatrix*>& rhos,
                               const std::vector<ComplexMatrix>& elements) {
  RealMatrix p(static_cast<Eigen::Index>(rhos.size()), static_cast<Eigen::Index>(elements.size()));
  for (std::size_t j = 0; j < rhos.size(); ++j) {
    for (std::size_t k = 0; k < elements.size(); ++k) {
      p(j, k) = trace_of_product(*rhos[j], elements[k]).real();
    }
  }
  return p;
}

/// One multiplicative step with R_k replaced by (I + eps R_k); eps = inf is the full step.
std::vector<ComplexMatrix> update_step(const std::vector<ComplexMatrix>& elements,
                                       const std::vector<ComplexMatrix>& r, double eps) {
  const Eigen::Index d = elements.front().rows();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  std::vector<ComplexMatrix> next;
  next.reserve(elements.size());
  ComplexMatrix total = ComplexMatrix::Zero(d, d);
  for (std::size_t k = 0; k < elements.size(); ++k) {
    const ComplexMatrix rk = std::isinf(eps) ? r[k] : ComplexMatrix(id + eps * r[k]);
    next.push_back(rk * elements[k] * rk);
    total += next.back();
  }
  const ComplexMatrix norm = psd_inverse_sqrt(total);
  for (auto& e : next) e = hermitian_part(norm * e * norm);
  return next;
}

}  // namespace

std::size_t ReferenceSet::index_of(char first, char second) const {
  for (std::size_t j = 0; j < states.size(); ++j) {
    if (states[j].first == first && states[j].second == second) return j;
  }
  throw std::invalid_argument(fmt::format("unknown reference input ({},{})", first, second));
}

ComplexVector reference_ket(char label) {
  const double s = 1.0 / std::sqrt(2.0);
  ComplexVector ket(2);
  switch (label) {
    case 'H': ket << 1.0, 0.0; break;
    case 'V': ket << 0.0, 1.0; break;
    case 'D': ket << s, s; break;
    case 'A': ket << s, -s; break;
    case 'R': ket << s, kI * s; break;
    case 'L': ket << s, -kI * s; break;
    default: throw std::invalid_argument(fmt::format("unknown reference label '{}'", label));
  }
  return ket;
}

ReferenceSet reference_states() {
  ReferenceSet refs;
  for (char a : kReferenceLabels) {
    for (char b : kReferenceLabels) {
      const ComplexMatrix ka = reference_ket(a);
      const ComplexMatrix kb = reference_ket(b);
      refs.states.push_back({a, b, DensityMatrix::from_pure(tensor_product(ka, kb))});
    }
  }
  std::vector<const ComplexMatrix*> ops;
  for (const auto& s : refs.states) ops.push_back(&s.state.matrix());
  const RealMatrix v = operator_space_matrix(ops);
  Eigen::JacobiSVD<RealMatrix> svd(v);
  const RealVector& sv = svd.singularValues();
  refs.gram_rank = static_cast<int>((sv.array() > 1e-10 * sv(0)).count());
  if (refs.gram_rank != 16) {
    throw std::logic_error(fmt::format("reference Gram rank {} != 16", refs.gram_rank));
  }
  // Gram matrix V^T V has squared singular values.
  refs.gram_condition = std::pow(sv(0) / sv(refs.gram_rank - 1), 2);
  return refs;
}

CountsTable expected_counts(const Povm& povm, const ReferenceSet& refs, double exposure) {
  if (!(exposure > 0.0)) throw std::invalid_argument("exposure must be positive");
  if (povm.dim() != 4) throw std::invalid_argument("detector tomography expects a two-qubit POVM");
  CountsTable table;
  table.exposure = exposure;
  table.outcome_labels = povm.labels();
  table.counts.resize(static_cast<Eigen::Index>(refs.states.size()),
                      static_cast<Eigen::Index>(povm.size()));
  for (std::size_t j = 0; j < refs.states.size(); ++j) {
    table.inputs.push_back({refs.states[j].first, refs.states[j].second});
    for (std::size_t k = 0; k < povm.size(); ++k) {
      const double p = trace_of_product(refs.states[j].state.matrix(), povm[k].element).real();
      table.counts(j, k) = exposure * std::max(p, 0.0);
    }
  }
  return table;
}

CountsTable simulate_counts(const Povm& povm, const ReferenceSet& refs, double exposure,
                            std::uint64_t seed) {
  CountsTable table = expected_counts(povm, refs, exposure);
  std::mt19937_64 rng(seed);
  for (Eigen::Index j = 0; j < table.counts.rows(); ++j) {
    for (Eigen::Index k = 0; k < table.counts.cols(); ++k) {
      const double mean = table.counts(j, k);
      if (mean <= 0.0) {
        table.counts(j, k) = 0.0;
        continue;
      }
      std::poisson_distribution<long long> draw(mean);
      table.counts(j, k) = static_cast<double>(draw(rng));
    }
  }
  return table;
}

MleResult mle_reconstruct(const CountsTable& counts, const ReferenceSet& refs,
                          const MleOptions& options) {
  const auto k_count = counts.outcome_labels.size();
  if (k_count == 0 || counts.counts.cols() != static_cast<Eigen::Index>(k_count) ||
      counts.counts.rows() != static_cast<Eigen::Index>(counts.inputs.size())) {
    throw std::invalid_argument("counts table is malformed");
  }
  if ((counts.counts.array() < 0.0).any() || !counts.counts.allFinite()) {
    throw std::invalid_argument("counts must be finite and non-negative");
  }
  for (Eigen::Index j = 0; j < counts.counts.rows(); ++j) {
    if (counts.counts.row(j).sum() <= 0.0) {
      throw std::invalid_argument(fmt::format("input ({},{}) has no counts", counts.inputs[j][0],
                                              counts.inputs[j][1]));
    }
  }

  const std::vector<std::size_t> idx = match_inputs(counts, refs);
  std::vector<const ComplexMatrix*> rhos;
  for (std::size_t j : idx) rhos.push_back(&refs.states[j].state.matrix());
  const Eigen::Index d = rhos.front()->rows();
  if (numerical_rank(operator_space_matrix(rhos)) < d * d) {
    throw std::invalid_argument("reference inputs are not informationally complete");
  }

  const RealMatrix& n = counts.counts;
  std::vector<ComplexMatrix> elements(k_count,
                                      ComplexMatrix::Identity(d, d) / static_cast<double>(k_count));
  RealMatrix p = model_probabilities(rhos, elements);
  double ll = log_likelihood(n, p);

  MleResult result;
  result.log_likelihood_history.push_back(ll);
  std::vector<ComplexMatrix> r(k_count);
  for (int iter = 0; iter < options.max_iters; ++iter) {
    result.floored_events = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      r[k] = ComplexMatrix::Zero(d, d);
      for (std::size_t j = 0; j < rhos.size(); ++j) {
        const double njk = n(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        if (njk <= 0.0) continue;
        double pjk = p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        if (pjk < kProbabilityFloor) {
          pjk = kProbabilityFloor;
          ++result.floored_events;
        }
        r[k] += (njk / pjk) * *rhos[j];
      }
    }

    // Full step first; dilute until the likelihood does not decrease.
    std::vector<ComplexMatrix> next;
    RealMatrix next_p;
    double next_ll = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (double eps = std::numeric_limits<double>::infinity(); eps > 1e-12;
         eps = std::isinf(eps) ? 1.0 : eps / 2.0) {
      next = update_step(elements, r, eps);
      next_p = model_probabilities(rhos, next);
      next_ll = log_likelihood(n, next_p);
      if (next_ll >= ll) {
        accepted = true;
        break;
      }
    }
    result.iterations = iter + 1;
    if (!accepted) {
      // No ascent step left at double precision: stationary point.
      result.converged = true;
      break;
    }
    if (next_ll < result.log_likelihood_history.back()) {
      throw std::logic_error("log-likelihood decreased on an accepted iteration");
    }
    const double change = std::abs(next_ll - ll) / std::max(std::abs(ll), 1.0);
    elements = std::move(next);
    p = std::move(next_p);
    ll = next_ll;
    result.log_likelihood_history.push_back(ll);
    if (change < options.tol) {
      result.converged = true;
      break;
    }
  }

  std::vector<PovmOutcome> outcomes;
  for (std::size_t k = 0; k < k_count; ++k) {
    outcomes.push_back({counts.outcome_labels[k], std::move(elements[k])});
  }
  result.povm = Povm(std::move(outcomes));
  result.log_likelihood = ll;
  return result;
}

double povm_fidelity(const ComplexMatrix& candidate, const ComplexMatrix& ideal) {
  if (candidate.rows() != ideal.rows() || candidate.cols() != ideal.cols()) {
    throw std::invalid_argument("fidelity operands differ in shape");
  }
  const double ta = candidate.trace().real();
  const double tb = ideal.trace().real();
  if (std::abs(ta) < 1e-15 || std::abs(tb) < 1e-15) {
    throw std::invalid_argument("fidelity needs operators with non-zero trace");
  }
  const ComplexMatrix root = psd_sqrt(candidate / ta);
  const ComplexMatrix inner = root * (ideal / tb) * root;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(inner), Eigen::EigenvaluesOnly);
  const double s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::clamp(s * s, 0.0, 1.0);
}

double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  return 0.5 * trace_norm(a - b);
}

MonteCarloSummary monte_carlo_uncertainty(const CountsTable& counts,
                                          const std::function<double(const CountsTable&)>& derived,
                                          int runs, std::uint64_t seed) {
  if (runs < 2) throw std::invalid_argument("Monte Carlo needs at least two runs");
  MonteCarloSummary summary;
  summary.runs = runs;
  std::string first_error;
  for (int run = 0; run < runs; ++run) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run)};
    std::mt19937_64 rng(seq);
    CountsTable resampled = counts;
    for (Eigen::Index j = 0; j < resampled.counts.rows(); ++j) {
      for (Eigen::Index k = 0; k < resampled.counts.cols(); ++k) {
        const double observed = counts.counts(j, k);
        if (observed <= 0.0) {
          resampled.counts(j, k) = 0.0;
          continue;
        }
        std::poisson_distribution<long long> draw(observed);
        resampled.counts(j, k) = static_cast<double>(draw(rng));
      }
    }
    try {
      const double value = derived(resampled);
      if (!std::isfinite(value)) throw std::runtime_error("non-finite value");
      summary.samples.push_back(value);
    } catch (const std::exception& e) {
      ++summary.failed_runs;
      if (first_error.empty()) first_error = fmt::format("run {}: {}", run, e.what());
    }
  }
  if (summary.failed_runs * 10 > runs) {
    throw std::runtime_error(fmt::format("Monte Carlo aborted: {} of {} runs failed (first: {})",
                                         summary.failed_runs, runs, first_error));
  }
  const auto m = static_cast<double>(summary.samples.size());
  double mean = 0.0;
  for (double v : summary.samples) mean += v;
  mean /= m;
  double var = 0.0;
  for (double v : summary.samples) var += (v - mean) * (v - mean);
  summary.mean = mean;
  summary.standard_deviation = m > 1 ? std::sqrt(var / (m - 1.0)) : 0.0;
  return summary;
}

std::string counts_to_csv(const CountsTable& table) {
  std::string out = "input1,input2,outcome,counts\n";
  for (Eigen::Index j = 0; j < table.counts.rows(); ++j) {
    for (Eigen::Index k = 0; k < table.counts.cols(); ++k) {
      out += fmt::format("{},{},{},{:.17g}\n", table.inputs[j][0], table.inputs[j][1],
                         table.outcome_labels[k], table.counts(j, k));
    }
  }
  return out;
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

CountsTable counts_from_csv(std::string_view text, const ReferenceSet& refs) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<std::string> outcomes;
  std::map<std::pair<std::size_t, std::string>, double> cells;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"input1", "input2", "outcome", "counts"}) {
        throw std::invalid_argument("counts CSV header must be input1,input2,outcome,counts");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 4 || fields[0].size() != 1 || fields[1].size() != 1) {
      throw std::invalid_argument(fmt::format("counts CSV line {} is malformed", line_no));
    }
    const std::size_t j = refs.index_of(fields[0][0], fields[1][0]);
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument(fmt::format("counts CSV line {}: bad count '{}'", line_no, fields[3]));
    }
    if (!std::isfinite(value) || value < 0.0) {
      throw std::invalid_argument(fmt::format("counts CSV line {}: negative count", line_no));
    }
    if (std::find(outcomes.begin(), outcomes.end(), fields[2]) == outcomes.end()) {
      outcomes.push_back(fields[2]);
    }
    if (!cells.emplace(std::make_pair(j, fields[2]), value).second) {
      throw std::invalid_argument(fmt::format("counts CSV line {}: duplicate ({},{},{})", line_no,
                                              fields[0], fields[1], fields[2]));
    }
  }
  if (!header_seen) throw std::invalid_argument("counts CSV is empty");

  CountsTable table;
  table.outcome_labels = outcomes;
  table.counts.resize(static_cast<Eigen::Index>(refs.states.size()),
                      static_cast<Eigen::Index>(outcomes.size()));
  for (std::size_t j = 0; j < refs.states.size(); ++j) {
    table.inputs.push_back({refs.states[j].first, refs.states[j].second});
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      const auto it = cells.find({j, outcomes[k]});
      if (it == cells.end()) {
        throw std::invalid_argument(fmt::format("counts CSV misses ({},{},{})", refs.states[j].first,
                                                refs.states[j].second, outcomes[k]));
      }
      table.counts(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = it->second;
    }
  }
  table.exposure = table.counts.rowwise().sum().mean();
  return table;
}

}  // namespace qmetro
