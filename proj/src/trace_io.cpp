#include "pollmgraph/trace_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "pollmgraph/codec.hpp"
#include "pollmgraph/errors.hpp"

namespace pollmgraph {

using nlohmann::json;

nlohmann::json manifest_record_to_json(const TraceManifestRecord& r) {
  json j{{"id", r.id},
         {"tokens", r.tokens},
         {"label", r.label ? json(to_int(*r.label)) : json(nullptr)},
         {"n_tokens", r.n_tokens},
         {"dim", r.dim},
         {"offset", r.offset}};
  if (r.category) j["category"] = *r.category;
  return j;
}

TraceManifestRecord manifest_record_from_json(const nlohmann::json& j) {
  TraceManifestRecord r;
  try {
    r.id = codec::field(j, "id").get<std::string>();
    r.tokens = codec::field(j, "tokens").get<std::vector<std::string>>();
    const json& label = codec::field(j, "label");
    if (!label.is_null()) r.label = label_from_int(label.get<int>());
    r.n_tokens = codec::field(j, "n_tokens").get<std::size_t>();
    r.dim = codec::field(j, "dim").get<std::size_t>();
    r.offset = codec::field(j, "offset").get<std::uint64_t>();
    if (j.contains("category") && !j["category"].is_null()) r.category = j["category"].get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad manifest record: ") + e.what());
  }
  if (r.n_tokens != r.tokens.size()) {
    throw FormatError("trace " + r.id + ": n_tokens = " + std::to_string(r.n_tokens) + " but " +
                      std::to_string(r.tokens.size()) + " tokens listed");
  }
  return r;
}

std::vector<nlohmann::json> read_ndjson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
    out.push_back(std::move(j));
  }
  return out;
}

namespace {

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

float read_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= std::uint32_t{static_cast<unsigned char>(p[b])} << (8 * b);
  return std::bit_cast<float>(bits);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

}  // namespace

Dataset read_traces(const std::filesystem::path& manifest, const std::filesystem::path& binary) {
  const std::vector<char> blob = slurp(binary);
  if (blob.size() < kEmbeddingHeaderBytes || std::memcmp(blob.data(), kEmbeddingMagic.data(), 4) != 0) {
    throw FormatError(binary.string() + ": bad magic, expected \"PLMG\"");
  }
  std::uint32_t version = 0;
  for (int b = 0; b < 4; ++b) version |= std::uint32_t{static_cast<unsigned char>(blob[4 + b])} << (8 * b);
  if (version != kEmbeddingVersion) {
    throw VersionError(binary.string() + ": unsupported embedding file version " + std::to_string(version));
  }
  if ((blob.size() - kEmbeddingHeaderBytes) % 4 != 0) {
    throw FormatError(binary.string() + ": float payload length mismatch (" +
                      std::to_string(blob.size() - kEmbeddingHeaderBytes) + " bytes is not a multiple of 4)");
  }

  Dataset ds;
  for (const json& j : read_ndjson(manifest)) {
    const TraceManifestRecord r = manifest_record_from_json(j);
    const std::uint64_t bytes = std::uint64_t{r.n_tokens} * r.dim * 4;
    if (r.offset < kEmbeddingHeaderBytes || r.offset > blob.size() || bytes > blob.size() - r.offset) {
      throw FormatError("trace " + r.id + ": offset " + std::to_string(r.offset) + " + " + std::to_string(bytes) +
                        " bytes out of bounds for " + std::to_string(blob.size()) + "-byte embedding file");
    }
    ConcreteTrace t;
    t.id = r.id;
    t.tokens = r.tokens;
    t.label = r.label;
    t.category = r.category;
    t.embeddings.resize(static_cast<Eigen::Index>(r.n_tokens), static_cast<Eigen::Index>(r.dim));
    const char* p = blob.data() + r.offset;
    for (Eigen::Index i = 0; i < t.embeddings.size(); ++i, p += 4) t.embeddings.data()[i] = read_f32(p);
    ds.traces.push_back(std::move(t));
  }
  return ds;
}

void write_traces(const Dataset& dataset, const std::filesystem::path& manifest, const std::filesystem::path& binary) {
  std::string blob(kEmbeddingMagic.begin(), kEmbeddingMagic.end());
  put_u32(blob, kEmbeddingVersion);
  std::string lines;
  for (const auto& t : dataset.traces) {
    TraceManifestRecord r{t.id, t.tokens, t.label, t.tokens.size(), static_cast<std::size_t>(t.embeddings.cols()),
                          blob.size(), t.category};
    if (static_cast<std::size_t>(t.embeddings.rows()) != t.tokens.size()) {
      throw ValidationError("trace " + t.id + ": row count mismatch");
    }
    for (Eigen::Index i = 0; i < t.embeddings.size(); ++i) {
      put_u32(blob, std::bit_cast<std::uint32_t>(static_cast<float>(t.embeddings.data()[i])));
    }
    lines += manifest_record_to_json(r).dump() + "\n";
  }
  std::ofstream mout(manifest, std::ios::binary | std::ios::trunc);
  std::ofstream bout(binary, std::ios::binary | std::ios::trunc);
  if (!mout || !bout) throw Error("cannot open output files " + manifest.string() + ", " + binary.string());
  mout << lines;
  bout.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!mout || !bout) throw Error("failed writing trace files");
}

void write_abstract_traces(const std::vector<AbstractTrace>& traces, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& t : traces) {
    out << json{{"id", t.id}, {"label", t.label ? json(to_int(*t.label)) : json(nullptr)}, {"states", t.states}}.dump()
        << "\n";
  }
}

}  // namespace pollmgraph
