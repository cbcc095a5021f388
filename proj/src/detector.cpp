#include "pollmgraph/detector.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "pollmgraph/codec.hpp"
#include "pollmgraph/errors.hpp"
#include "pollmgraph/numeric.hpp"
#include "pollmgraph/serialize.hpp"

namespace pollmgraph {

using nlohmann::json;
using codec::field;

std::string to_string(ModelType t) { return t == ModelType::mm ? "mm" : "hmm"; }

ModelType model_type_from_string(const std::string& s) {
  if (s == "mm") return ModelType::mm;
  if (s == "hmm") return ModelType::hmm;
  throw ValidationError("unknown model type \"" + s + "\" (expected mm or hmm)");
}

json config_to_json(const DetectorConfig& c) {
  return json{{"abstraction_method", to_string(c.abstraction_method)},
              {"n_states", c.n_states},
              {"pca_dim", c.pca_dim ? json(*c.pca_dim) : json(nullptr)},
              {"theta", c.theta},
              {"grid_dims", c.grid_dims},
              {"model_type", to_string(c.model_type)},
              {"n_hidden", c.n_hidden},
              {"epsilon", c.epsilon},
              {"seed", c.seed},
              {"max_iter", c.max_iter},
              {"tol", c.tol},
              {"prior_override", c.prior_override ? json(*c.prior_override) : json(nullptr)},
              {"threshold", c.threshold}};
}

DetectorConfig config_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("detector config must be a JSON object");
  static const std::set<std::string> known{"abstraction_method", "n_states", "pca_dim", "theta",   "grid_dims",
                                           "model_type",         "n_hidden", "epsilon", "seed",    "max_iter",
                                           "tol",                "prior_override", "threshold", "threads"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ValidationError("unknown config key \"" + key + "\"");
  }
  DetectorConfig c;
  try {
    if (j.contains("abstraction_method")) c.abstraction_method = abstraction_method_from_string(j["abstraction_method"]);
    if (j.contains("n_states")) c.n_states = j["n_states"].get<std::size_t>();
    if (j.contains("pca_dim")) {
      c.pca_dim = j["pca_dim"].is_null() ? std::nullopt : std::optional<std::size_t>(j["pca_dim"].get<std::size_t>());
    }
    if (j.contains("theta")) c.theta = j["theta"].get<double>();
    if (j.contains("grid_dims")) c.grid_dims = j["grid_dims"].get<std::size_t>();
    if (j.contains("model_type")) c.model_type = model_type_from_string(j["model_type"]);
    if (j.contains("n_hidden")) c.n_hidden = j["n_hidden"].get<std::size_t>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("max_iter")) c.max_iter = j["max_iter"].get<std::size_t>();
    if (j.contains("tol")) c.tol = j["tol"].get<double>();
    if (j.contains("prior_override")) {
      c.prior_override = j["prior_override"].is_null() ? std::nullopt : std::optional<double>(j["prior_override"].get<double>());
    }
    if (j.contains("threshold")) c.threshold = j["threshold"].get<double>();
    if (j.contains("threads")) c.threads = j["threads"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad detector config: ") + e.what());
  }
  if (c.n_states < 1) throw ValidationError("n_states must be >= 1");
  if (c.n_hidden < 1) throw ValidationError("n_hidden must be >= 1");
  if (c.pca_dim && *c.pca_dim < 1) throw ValidationError("pca_dim must be >= 1");
  if (c.prior_override && !(*c.prior_override >= 0.0 && *c.prior_override <= 1.0)) {
    throw ValidationError("prior_override must lie in [0, 1]");
  }
  return c;
}

std::string reference_fingerprint(const Dataset& reference) {
  std::vector<std::uint8_t> bytes;
  auto put = [&bytes](std::string_view s) {
    bytes.insert(bytes.end(), s.begin(), s.end());
    bytes.push_back(0x1f);
  };
  for (const auto& t : reference.traces) {
    put(t.id);
    put(t.label ? std::to_string(to_int(*t.label)) : "null");
    put(t.category.value_or(""));
    for (const auto& tok : t.tokens) put(tok);
    put(std::to_string(t.embeddings.rows()) + "x" + std::to_string(t.embeddings.cols()));
    for (Eigen::Index i = 0; i < t.embeddings.size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(t.embeddings.data()[i]);
      for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
    bytes.push_back(0x1e);
  }
  return codec::sha256_hex(bytes);
}

namespace {

// Re-raises library errors with the failing stage prefixed, keeping the type.
template <typename F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const VersionError& e) {
    throw VersionError(std::string(stage) + ": " + e.what());
  } catch (const ChecksumError& e) {
    throw ChecksumError(std::string(stage) + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(std::string(stage) + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(stage) + ": " + e.what());
  } catch (const FitError& e) {
    throw FitError(std::string(stage) + ": " + e.what());
  }
}

Matrix pooled_embeddings(const Dataset& d) {
  Eigen::Index rows = 0;
  for (const auto& t : d.traces) rows += t.embeddings.rows();
  Matrix pooled(rows, d.traces.front().embeddings.cols());
  Eigen::Index at = 0;
  for (const auto& t : d.traces) {
    pooled.middleRows(at, t.embeddings.rows()) = t.embeddings;
    at += t.embeddings.rows();
  }
  return pooled;
}

Abstractor fit_abstractor_pooled(const DetectorConfig& config, const Matrix& pooled) {
  Abstractor a;
  const auto m = static_cast<std::size_t>(pooled.cols());
  std::optional<Eigen::Index> k;
  if (config.pca_dim) k = static_cast<Eigen::Index>(std::min(*config.pca_dim, m));
  a.pca = in_stage("pca", [&] { return fit_pca(pooled, config.theta, k); });
  const Matrix projected = a.pca.project(pooled);

  switch (config.abstraction_method) {
    case AbstractionMethod::grid:
      a.backend = in_stage("grid", [&] {
        const std::size_t dims = std::min(config.grid_dims, static_cast<std::size_t>(projected.cols()));
        return fit_grid(projected, grid_intervals_for(config.n_states, dims), dims);
      });
      break;
    case AbstractionMethod::gmm:
      a.backend = in_stage("gmm", [&] {
        return fit_gmm(projected, GmmOptions{config.n_states, config.seed, config.tol, config.max_iter});
      });
      break;
    case AbstractionMethod::kmeans:
      a.backend = in_stage("kmeans", [&] {
        return fit_kmeans(projected, KmeansOptions{config.n_states, config.seed, std::max<std::size_t>(config.max_iter, 1)});
      });
      break;
  }
  return a;
}

std::vector<AbstractTrace> abstract_all(const Abstractor& a, const Dataset& d) {
  std::vector<AbstractTrace> out;
  out.reserve(d.size());
  for (const auto& t : d.traces) out.push_back(abstract_trace(a, t));
  return out;
}

}  // namespace

Abstractor fit_abstractor(const DetectorConfig& config, const Dataset& reference) {
  in_stage("validate", [&] {
    const auto report = validate_dataset(reference);
    if (!report.ok()) throw ValidationError(report.summary());
  });
  return fit_abstractor_pooled(config, pooled_embeddings(reference));
}

DetectorModel train_pipeline(const DetectorConfig& config, const Dataset& reference,
                             std::optional<std::string> created_at) {
  in_stage("validate", [&] {
    const auto report = validate_dataset(reference);
    if (!report.ok()) throw ValidationError(report.summary());
    if (reference.size() < 2) throw ValidationError("reference needs at least 2 traces");
    std::array<std::size_t, 2> counts{0, 0};
    for (const auto& t : reference.traces) {
      if (!t.label) throw ValidationError("unlabeled trace " + t.id);
      ++counts[to_int(*t.label)];
    }
    for (int y = 0; y < 2; ++y) {
      if (counts[y] == 0) throw ValidationError("empty class " + std::to_string(y));
    }
  });

  DetectorModel model;
  model.config = config;
  model.abstractor = fit_abstractor_pooled(config, pooled_embeddings(reference));
  const auto traces = in_stage("abstract", [&] { return abstract_all(model.abstractor, reference); });
  const std::size_t n_states = model.abstractor.n_states();

  if (config.model_type == ModelType::mm) {
    model.model = in_stage("mm", [&] { return fit_mm(traces, n_states, config.epsilon); });
  } else {
    HmmDetector det;
    det.hmm = in_stage("hmm", [&] {
      return fit_hmm(traces, n_states, HmmOptions{config.n_hidden, config.seed, config.max_iter, config.tol, config.threads});
    });
    det.binding = in_stage("bind", [&] { return bind_semantics(det.hmm, traces, config.epsilon); });
    model.model = std::move(det);
  }

  model.provenance.reference_fingerprint = reference_fingerprint(reference);
  model.provenance.n_reference = reference.size();
  model.provenance.seed = config.seed;
  model.provenance.created_at = std::move(created_at);
  return model;
}

DetectionResult detect(const DetectorModel& model, const ConcreteTrace& trace) {
  const AbstractTrace abs = abstract_trace(model.abstractor, trace);
  DetectionResult r;
  r.trace_id = trace.id;
  const auto& prior = model.config.prior_override;
  if (const auto* mm = std::get_if<LabeledMarkovModel>(&model.model)) {
    r.per_class_log_likelihood = {mm_log_likelihood(*mm, abs, Label::factual),
                                  mm_log_likelihood(*mm, abs, Label::hallucination)};
    r.score = mm_posterior(*mm, abs, prior);
  } else {
    const auto& det = std::get<HmmDetector>(model.model);
    const auto scores = hmm_class_scores(det.hmm, det.binding, abs, 0.5);
    // With a 0.5 prior both scores carry the same log(0.5); remove it.
    r.per_class_log_likelihood = {scores[0] - safe_log(0.5), scores[1] - safe_log(0.5)};
    r.score = hmm_posterior(det.hmm, det.binding, abs, prior);
    r.token_scores = token_scores(det.hmm, det.binding, abs);
  }
  r.hard_label = r.score >= model.config.threshold ? Label::hallucination : Label::factual;
  return r;
}

std::vector<DetectionResult> detect_batch(const DetectorModel& model, const std::vector<ConcreteTrace>& traces,
                                          std::size_t threads) {
  std::vector<DetectionResult> out(traces.size());
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(traces.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < traces.size(); ++i) out[i] = detect(model, traces[i]);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < traces.size(); i += workers) out[i] = detect(model, traces[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<double> explain(const DetectorModel& model, const ConcreteTrace& trace) {
  const auto* det = std::get_if<HmmDetector>(&model.model);
  if (!det) throw ValidationError("token scores require hmm model");
  return token_scores(det->hmm, det->binding, abstract_trace(model.abstractor, trace));
}

namespace {

constexpr std::string_view kChecksumKey = "checksum";

std::string checksum_text(std::uint32_t crc) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return std::string("crc32c:") + buf;
}

}  // namespace

std::string serialize_detector(const DetectorModel& model) {
  json body{{"schema_version", kSchemaVersion},
            {"format", "pollmgraph-detector"},
            {"config", config_to_json(model.config)},
            {"abstractor", abstractor_to_json(model.abstractor)},
            {"provenance",
             {{"reference_fingerprint", model.provenance.reference_fingerprint},
              {"n_reference", model.provenance.n_reference},
              {"seed", model.provenance.seed},
              {"created_at", model.provenance.created_at ? json(*model.provenance.created_at) : json(nullptr)}}}};
  if (const auto* mm = std::get_if<LabeledMarkovModel>(&model.model)) {
    body["model"] = markov_to_json(*mm);
  } else {
    const auto& det = std::get<HmmDetector>(model.model);
    body["model"] = hmm_to_json(det.hmm, &det.binding);
  }
  std::string text = body.dump();
  const std::uint32_t crc = codec::crc32c(text);
  text.pop_back();  // reopen the object to append the trailing checksum
  text += ",\"" + std::string(kChecksumKey) + "\":\"" + checksum_text(crc) + "\"}\n";
  return text;
}

DetectorModel parse_detector(std::string_view text) {
  json doc = json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ChecksumError("detector file is truncated or corrupted (not a complete JSON document)");
  }
  check_schema_version(doc);
  if (!doc.contains(kChecksumKey)) throw ChecksumError("detector file has no checksum field");
  const std::string stored = doc[std::string(kChecksumKey)].get<std::string>();
  doc.erase(std::string(kChecksumKey));
  const std::string expected = checksum_text(codec::crc32c(doc.dump()));
  if (stored != expected) throw ChecksumError("checksum mismatch: file says " + stored + ", body hashes to " + expected);

  return in_stage("load", [&] {
    DetectorModel model;
    try {
      model.config = config_from_json(field(doc, "config"));
      model.abstractor = abstractor_from_json(field(doc, "abstractor"));
      const json& prov = field(doc, "provenance");
      model.provenance.reference_fingerprint = field(prov, "reference_fingerprint").get<std::string>();
      model.provenance.n_reference = field(prov, "n_reference").get<std::size_t>();
      model.provenance.seed = field(prov, "seed").get<std::uint64_t>();
      if (!field(prov, "created_at").is_null()) model.provenance.created_at = prov["created_at"].get<std::string>();
      const json& m = field(doc, "model");
      if (field(m, "model_type").get<std::string>() == "mm") {
        model.model = markov_from_json(m);
      } else {
        model.model = HmmDetector{hmm_from_json(m), semantics_from_json(m)};
      }
    } catch (const json::exception& e) {
      throw FormatError(std::string("malformed detector document: ") + e.what());
    }
    if (model.abstractor.n_states() !=
        std::visit([](const auto& x) {
          if constexpr (std::is_same_v<std::decay_t<decltype(x)>, LabeledMarkovModel>) return x.n_states;
          else return x.hmm.n_obs();
        }, model.model)) {
      throw FormatError("abstractor alphabet size differs from the model's");
    }
    return model;
  });
}

void save_model(const DetectorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << serialize_detector(model);
  if (!out) throw Error("failed writing " + path.string());
}

DetectorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_detector(buf.str());
}

}  // namespace pollmgraph
