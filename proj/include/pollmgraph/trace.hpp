#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pollmgraph {

// Row-major so each token's embedding is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Abstract-state symbol o_t; always < the producing abstractor's alphabet size.
using Symbol = std::uint32_t;

// y = 1 marks a hallucinated answer.
enum class Label : std::uint8_t { factual = 0, hallucination = 1 };

inline int to_int(Label y) { return static_cast<int>(y); }
Label label_from_int(int v);

// Per-token hidden activations for one generated answer.
struct ConcreteTrace {
  std::string id;
  std::vector<std::string> tokens;
  Matrix embeddings;  // tokens.size() x m
  std::optional<Label> label;
  std::optional<std::string> category;

  std::size_t size() const { return tokens.size(); }
  Eigen::Index dim() const { return embeddings.cols(); }
};

struct AbstractTrace {
  std::string id;
  std::vector<Symbol> states;
  std::optional<Label> label;

  std::size_t size() const { return states.size(); }
};

template <typename Trace>
struct BasicDataset {
  std::vector<Trace> traces;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return traces.size(); }
  bool empty() const { return traces.empty(); }
};

using Dataset = BasicDataset<ConcreteTrace>;
using AbstractDataset = BasicDataset<AbstractTrace>;

struct Violation {
  std::string trace_id;
  std::string reason;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  // All violations joined into one line, for error messages.
  std::string summary() const;
};

ValidationReport validate_dataset(const Dataset& dataset);
ValidationReport validate_dataset(const AbstractDataset& dataset, std::size_t n_states);

// Throws ValidationError if any trace lacks a label; returns per-class counts.
std::array<std::size_t, 2> require_labels(const std::vector<AbstractTrace>& traces);

}  // namespace pollmgraph
