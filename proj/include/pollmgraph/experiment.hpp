#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pollmgraph/detector.hpp"
#include "pollmgraph/eval.hpp"
#include "pollmgraph/synthetic.hpp"

namespace pollmgraph {

struct TraceFiles {
  std::filesystem::path manifest;
  std::filesystem::path embeddings;
};

// A grid of detector configurations evaluated under one split protocol.
// Empty axis lists fall back to the base config's value.
struct ExperimentConfig {
  DetectorConfig base;
  std::vector<std::size_t> n_states;
  std::vector<std::size_t> n_hidden;
  std::vector<std::optional<std::size_t>> pca_dims;  // nullopt = automatic k from theta
  std::vector<AbstractionMethod> methods;
  std::vector<ModelType> model_types;

  // Exactly one data source: synthetic, or files (optionally with a separate
  // test set for cross-dataset runs).
  std::optional<SyntheticSpec> synthetic;
  std::optional<TraceFiles> dataset;
  std::optional<TraceFiles> test_dataset;

  // Fraction split over `fractions` (each a grid axis value) or a category split.
  std::vector<double> fractions{0.5};
  std::optional<CategorySplit> categories;
  std::uint64_t split_seed = 0;

  std::size_t repetitions = 1;  // repetition r offsets both seeds by r
  std::optional<std::filesystem::path> output;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct CellResult {
  std::size_t index = 0;
  nlohmann::json cell;  // the configuration of this grid cell
  std::optional<double> auc;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  std::optional<std::string> error;
};

struct Report {
  std::vector<CellResult> cells;

  std::string to_ndjson() const;
  std::string summary() const;  // fixed-width table
};

// split -> train_pipeline -> detect -> auc_roc for every cell. A failing cell
// records its error and the run continues. Writes NDJSON to `output` if set.
Report run_experiment(const ExperimentConfig& config);

}  // namespace pollmgraph
