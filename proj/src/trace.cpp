#include "pollmgraph/trace.hpp"

#include <array>
#include <cmath>
#include <unordered_set>

#include "pollmgraph/errors.hpp"

namespace pollmgraph {

Label label_from_int(int v) {
  if (v != 0 && v != 1) throw ValidationError("label must be 0 or 1, got " + std::to_string(v));
  return static_cast<Label>(v);
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.trace_id + ": " + v.reason;
  }
  return out;
}

namespace {

template <typename Trace>
void check_unique_ids(const std::vector<Trace>& traces, ValidationReport& report) {
  std::unordered_set<std::string> seen;
  for (const auto& t : traces) {
    if (!seen.insert(t.id).second) report.violations.push_back({t.id, "duplicate id " + t.id});
  }
}

}  // namespace

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  std::optional<Eigen::Index> width;
  for (const auto& t : dataset.traces) {
    if (t.tokens.empty()) report.violations.push_back({t.id, "empty trace"});
    if (static_cast<std::size_t>(t.embeddings.rows()) != t.tokens.size()) {
      report.violations.push_back({t.id, "row count mismatch: " + std::to_string(t.tokens.size()) +
                                              " tokens, " + std::to_string(t.embeddings.rows()) +
                                              " embedding rows"});
    }
    if (t.embeddings.rows() > 0) {
      if (!width) {
        width = t.embeddings.cols();
      } else if (*width != t.embeddings.cols()) {
        report.violations.push_back({t.id, "embedding width " + std::to_string(t.embeddings.cols()) +
                                                " differs from dataset width " +
                                                std::to_string(*width)});
      }
    }
    if (!t.embeddings.allFinite()) report.violations.push_back({t.id, "non-finite embedding entry"});
  }
  check_unique_ids(dataset.traces, report);
  return report;
}

ValidationReport validate_dataset(const AbstractDataset& dataset, std::size_t n_states) {
  ValidationReport report;
  for (const auto& t : dataset.traces) {
    if (t.states.empty()) report.violations.push_back({t.id, "empty trace"});
    for (Symbol s : t.states) {
      if (s >= n_states) {
        report.violations.push_back({t.id, "symbol " + std::to_string(s) + " >= alphabet size " +
                                                std::to_string(n_states)});
        break;
      }
    }
  }
  check_unique_ids(dataset.traces, report);
  return report;
}

std::array<std::size_t, 2> require_labels(const std::vector<AbstractTrace>& traces) {
  std::array<std::size_t, 2> counts{0, 0};
  for (const auto& t : traces) {
    if (!t.label) throw ValidationError("unlabeled trace " + t.id);
    ++counts[to_int(*t.label)];
  }
  for (int y = 0; y < 2; ++y) {
    if (counts[y] == 0) throw ValidationError("empty class " + std::to_string(y));
  }
  return counts;
}

}  // namespace pollmgraph
