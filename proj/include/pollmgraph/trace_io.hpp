#pragma once

#include <array>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "pollmgraph/trace.hpp"

namespace pollmgraph {

// Binary embedding file: "PLMG", u32 LE version, then packed LE float32 rows
// addressed by manifest byte offsets.
inline constexpr std::array<char, 4> kEmbeddingMagic{'P', 'L', 'M', 'G'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 8;

// One manifest line. Keys are written in sorted order.
struct TraceManifestRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<Label> label;
  std::size_t n_tokens = 0;
  std::size_t dim = 0;
  std::uint64_t offset = 0;
  std::optional<std::string> category;
};

nlohmann::json manifest_record_to_json(const TraceManifestRecord& r);
TraceManifestRecord manifest_record_from_json(const nlohmann::json& j);

// Throws FormatError on bad magic, out-of-bounds offsets or a payload whose
// length is not a whole number of float32 values. Embeddings widen to double.
Dataset read_traces(const std::filesystem::path& manifest, const std::filesystem::path& binary);

// Embeddings narrow to float32; offsets are assigned sequentially.
void write_traces(const Dataset& dataset, const std::filesystem::path& manifest, const std::filesystem::path& binary);

// NDJSON lines {"id", "label", "states"} for abstracted traces.
void write_abstract_traces(const std::vector<AbstractTrace>& traces, const std::filesystem::path& path);

// Reads NDJSON into parsed objects; blank lines are skipped.
std::vector<nlohmann::json> read_ndjson(const std::filesystem::path& path);

}  // namespace pollmgraph
