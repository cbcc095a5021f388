#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "pollmgraph/abstraction.hpp"
#include "pollmgraph/hmm.hpp"
#include "pollmgraph/markov.hpp"

namespace pollmgraph {

enum class ModelType { mm, hmm };

std::string to_string(ModelType t);
ModelType model_type_from_string(const std::string& s);

struct DetectorConfig {
  AbstractionMethod abstraction_method = AbstractionMethod::gmm;
  std::size_t n_states = kDefaultStates;
  // Retained PCA dimension, clipped to the embedding width. Empty selects k
  // automatically from `theta`.
  std::optional<std::size_t> pca_dim = kDefaultPcaDim;
  double theta = kDefaultTheta;
  std::size_t grid_dims = kDefaultGridDims;
  ModelType model_type = ModelType::hmm;
  std::size_t n_hidden = kDefaultHiddenStates;
  double epsilon = kDefaultSmoothing;
  std::uint64_t seed = 0;
  std::size_t max_iter = 200;
  double tol = 1e-4;
  std::optional<double> prior_override;
  double threshold = 0.5;
  std::size_t threads = 1;  // runtime only, never serialised
};

nlohmann::json config_to_json(const DetectorConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
DetectorConfig config_from_json(const nlohmann::json& j);

struct Provenance {
  std::string reference_fingerprint;  // SHA-256 of the reference manifest and payload
  std::size_t n_reference = 0;
  std::uint64_t seed = 0;
  std::optional<std::string> created_at;
};

struct HmmDetector {
  Hmm hmm;
  SemanticBinding binding;
};

struct DetectorModel {
  DetectorConfig config;
  Abstractor abstractor;
  std::variant<LabeledMarkovModel, HmmDetector> model;
  Provenance provenance;

  ModelType model_type() const { return model.index() == 0 ? ModelType::mm : ModelType::hmm; }
};

struct DetectionResult {
  std::string trace_id;
  double score = 0.0;  // Pr(y = 1 | o)
  Label hard_label = Label::factual;
  std::optional<std::vector<double>> token_scores;  // HMM detectors only
  std::array<double, 2> per_class_log_likelihood{};
};

std::string reference_fingerprint(const Dataset& reference);

// PCA plus the configured clustering backend; labels are not needed.
Abstractor fit_abstractor(const DetectorConfig& config, const Dataset& reference);

DetectorModel train_pipeline(const DetectorConfig& config, const Dataset& reference,
                             std::optional<std::string> created_at = std::nullopt);

DetectionResult detect(const DetectorModel& model, const ConcreteTrace& trace);

// Scores every trace, optionally on several threads; output order matches input.
std::vector<DetectionResult> detect_batch(const DetectorModel& model, const std::vector<ConcreteTrace>& traces,
                                          std::size_t threads = 1);

// Token scores for one trace; throws ValidationError for Markov detectors.
std::vector<double> explain(const DetectorModel& model, const ConcreteTrace& trace);

// Canonical text: the sorted-key body followed by a trailing "checksum" field
// holding the CRC-32C of that body.
std::string serialize_detector(const DetectorModel& model);
DetectorModel parse_detector(std::string_view text);

void save_model(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_model(const std::filesystem::path& path);

}  // namespace pollmgraph
