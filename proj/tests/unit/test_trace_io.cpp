#include <doctest.h>

#include <fstream>
#include <iterator>

#include "../support/oracles.hpp"
#include "pollmgraph/codec.hpp"
#include "pollmgraph/errors.hpp"
#include "pollmgraph/trace_io.hpp"

using namespace pollmgraph;

namespace {

ConcreteTrace make_trace(const std::string& id, std::size_t n, Eigen::Index m, std::optional<Label> y, double base = 0.0) {
  ConcreteTrace t;
  t.id = id;
  for (std::size_t i = 0; i < n; ++i) t.tokens.push_back("tok" + std::to_string(i));
  t.embeddings.resize(static_cast<Eigen::Index>(n), m);
  for (Eigen::Index r = 0; r < t.embeddings.rows(); ++r)
    for (Eigen::Index c = 0; c < m; ++c) t.embeddings(r, c) = base + 0.25 * static_cast<double>(r) - 0.5 * static_cast<double>(c);
  t.label = y;
  return t;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("valid single trace yields an empty report") {
  Dataset d;
  d.traces.push_back(make_trace("a", 3, 4, Label::hallucination));
  CHECK(validate_dataset(d).ok());
}

TEST_CASE("row count mismatch is reported") {
  Dataset d;
  auto t = make_trace("a", 3, 4, Label::factual);
  t.embeddings.conservativeResize(2, 4);
  d.traces.push_back(t);
  const auto r = validate_dataset(d);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].trace_id == "a");
  CHECK(r.violations[0].reason.find("row count mismatch") == 0);
}

TEST_CASE("duplicate ids are reported once") {
  Dataset d;
  d.traces.push_back(make_trace("q7", 2, 3, Label::factual));
  d.traces.push_back(make_trace("q7", 2, 3, Label::hallucination));
  const auto r = validate_dataset(d);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].reason == "duplicate id q7");
}

TEST_CASE("other dataset violations") {
  Dataset d;
  d.traces.push_back(make_trace("empty", 0, 3, Label::factual));
  auto bad = make_trace("nan", 2, 3, Label::factual);
  bad.embeddings(1, 1) = std::nan("");
  d.traces.push_back(bad);
  d.traces.push_back(make_trace("wide", 2, 5, Label::factual));
  const auto r = validate_dataset(d);
  CHECK(r.violations.size() >= 3);
  CHECK_FALSE(r.summary().empty());

  AbstractDataset ad;
  ad.traces.push_back(AbstractTrace{"x", {0, 1, 7}, Label::factual});
  CHECK_FALSE(validate_dataset(ad, 4).ok());
  CHECK(validate_dataset(ad, 8).ok());
}

TEST_CASE("labels are required for training inputs") {
  std::vector<AbstractTrace> traces{{"a", {0}, Label::hallucination}, {"b", {1}, std::nullopt}};
  CHECK_THROWS_AS(require_labels(traces), ValidationError);
  traces[1].label = Label::hallucination;
  CHECK_THROWS_WITH_AS(require_labels(traces), doctest::Contains("empty class 0"), ValidationError);
  traces[1].label = Label::factual;
  CHECK(require_labels(traces) == std::array<std::size_t, 2>{1, 1});
}

TEST_CASE("trace files round-trip with identical bytes") {
  const auto dir = oracle::scratch_dir("trace_io");
  Dataset d;
  d.traces.push_back(make_trace("t0", 3, 4, Label::factual, 0.125));
  d.traces.push_back(make_trace("t1", 5, 4, Label::hallucination, -2.0));
  d.traces.push_back(make_trace("t2", 1, 4, std::nullopt, 7.5));
  d.traces[1].category = "history";
  write_traces(d, dir / "a.ndjson", dir / "a.bin");
  const Dataset back = read_traces(dir / "a.ndjson", dir / "a.bin");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.traces[i].id == d.traces[i].id);
    CHECK(back.traces[i].tokens == d.traces[i].tokens);
    CHECK(back.traces[i].label == d.traces[i].label);
    CHECK(back.traces[i].category == d.traces[i].category);
    // The stored values are float32; these fixtures are exactly representable.
    CHECK((back.traces[i].embeddings - d.traces[i].embeddings).cwiseAbs().maxCoeff() == 0.0);
  }
  write_traces(back, dir / "b.ndjson", dir / "b.bin");
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  CHECK(slurp(dir / "a.ndjson") == slurp(dir / "b.ndjson"));
  const std::string bin = slurp(dir / "a.bin");
  CHECK(bin.substr(0, 4) == "PLMG");
  CHECK(bin.size() == 8 + 4 * 4 * (3 + 5 + 1));
}

TEST_CASE("manifest keys are sorted") {
  TraceManifestRecord r{"q1", {"a", "b"}, Label::hallucination, 2, 3, 8, "geo"};
  const std::string line = manifest_record_to_json(r).dump();
  CHECK(line == R"({"category":"geo","dim":3,"id":"q1","label":1,"n_tokens":2,"offset":8,"tokens":["a","b"]})");
  const auto back = manifest_record_from_json(nlohmann::json::parse(line));
  CHECK(back.id == "q1");
  CHECK(back.offset == 8);
  auto bad = nlohmann::json::parse(line);
  bad["n_tokens"] = 5;
  CHECK_THROWS_AS(manifest_record_from_json(bad), FormatError);
}

TEST_CASE("bad magic names the expected magic") {
  const auto dir = oracle::scratch_dir("magic");
  Dataset d;
  d.traces.push_back(make_trace("t0", 2, 2, Label::factual));
  write_traces(d, dir / "m.ndjson", dir / "m.bin");
  std::string bin = slurp(dir / "m.bin");
  bin[0] = 'X';
  std::ofstream(dir / "m.bin", std::ios::binary | std::ios::trunc) << bin;
  CHECK_THROWS_WITH_AS(read_traces(dir / "m.ndjson", dir / "m.bin"), doctest::Contains("\"PLMG\""), FormatError);
}

TEST_CASE("unsupported binary version") {
  const auto dir = oracle::scratch_dir("version");
  Dataset d;
  d.traces.push_back(make_trace("t0", 2, 2, Label::factual));
  write_traces(d, dir / "m.ndjson", dir / "m.bin");
  std::string bin = slurp(dir / "m.bin");
  bin[4] = 9;
  std::ofstream(dir / "m.bin", std::ios::binary | std::ios::trunc) << bin;
  CHECK_THROWS_AS(read_traces(dir / "m.ndjson", dir / "m.bin"), VersionError);
}

TEST_CASE("offset beyond the file names the trace") {
  const auto dir = oracle::scratch_dir("bounds");
  Dataset d;
  d.traces.push_back(make_trace("t0", 2, 2, Label::factual));
  d.traces.push_back(make_trace("q7", 2, 2, Label::factual));
  write_traces(d, dir / "m.ndjson", dir / "m.bin");
  auto lines = read_ndjson(dir / "m.ndjson");
  lines[1]["offset"] = 4096;
  std::ofstream out(dir / "m.ndjson", std::ios::trunc);
  for (const auto& l : lines) out << l.dump() << "\n";
  out.close();
  CHECK_THROWS_WITH_AS(read_traces(dir / "m.ndjson", dir / "m.bin"), doctest::Contains("q7"), FormatError);
}

TEST_CASE("codec primitives") {
  using namespace pollmgraph::codec;
  CHECK(crc32c("123456789") == 0xE3069283u);
  const std::string abc = "abc";
  CHECK(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const std::vector<std::uint8_t> bytes{0, 1, 2, 250, 255};
  CHECK(base64_decode(base64_encode(bytes)) == bytes);

  Matrix m(2, 3);
  m << 1.0 / 3.0, -0.0, 1e-300, std::numeric_limits<double>::max(), 2.5, -7.125;
  const Matrix back = matrix_from_json(matrix_to_json(m));
  CHECK(back.rows() == 2);
  CHECK(std::memcmp(back.data(), m.data(), sizeof(double) * 6) == 0);
  CHECK_THROWS_AS(field(nlohmann::json::object(), "missing"), FormatError);
}
