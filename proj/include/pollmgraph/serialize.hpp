#pragma once

#include <nlohmann/json.hpp>

#include "pollmgraph/abstraction.hpp"
#include "pollmgraph/hmm.hpp"
#include "pollmgraph/markov.hpp"

namespace pollmgraph {

inline constexpr int kSchemaVersion = 1;

// JSON documents with base64 little-endian float64 matrices. Each carries
// "schema_version"; readers reject any other version with VersionError.
nlohmann::json abstractor_to_json(const Abstractor& a);
Abstractor abstractor_from_json(const nlohmann::json& j);

nlohmann::json markov_to_json(const LabeledMarkovModel& mm);
LabeledMarkovModel markov_from_json(const nlohmann::json& j);

// The binding, when given, is embedded under "semantics".
nlohmann::json hmm_to_json(const Hmm& hmm, const SemanticBinding* binding);
Hmm hmm_from_json(const nlohmann::json& j);
SemanticBinding semantics_from_json(const nlohmann::json& j);

void check_schema_version(const nlohmann::json& j);

}  // namespace pollmgraph
