#include "pollmgraph/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pollmgraph/detector.hpp"
#include "pollmgraph/errors.hpp"
#include "pollmgraph/eval.hpp"
#include "pollmgraph/experiment.hpp"
#include "pollmgraph/serialize.hpp"
#include "pollmgraph/synthetic.hpp"
#include "pollmgraph/trace_io.hpp"

namespace pollmgraph::cli {

using nlohmann::json;

namespace {

// Bad invocation discovered after flag parsing; maps to exit 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError(path + ": invalid JSON");
  return j;
}

DetectorConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  DetectorConfig c = path.empty() ? DetectorConfig{} : config_from_json(read_json_file(path));
  if (seed) c.seed = *seed;
  c.threads = thread_budget();
  return c;
}

Dataset load_traces(const std::string& manifest, const std::string& embeddings, std::ostream& err, const char* stage) {
  err << "[" << stage << "] reading " << manifest << "\n";
  Dataset d = read_traces(manifest, embeddings);
  const auto report = validate_dataset(d);
  if (!report.ok()) throw ValidationError("invalid traces: " + report.summary());
  return d;
}

std::optional<std::string> created_at_from_env() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) return std::string(epoch);
  return std::nullopt;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text;
}

struct Options {
  std::string config, traces, embeddings, out, out_states, model, trace_id, scores, labels, spec;
  std::string out_manifest, out_bin, out_train, out_test, generator;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold, fraction;
  std::vector<std::string> train_categories, test_categories;
};

int run_abstract(const Options& o, std::ostream& out, std::ostream& err) {
  const DetectorConfig c = load_config(o.config, o.seed);
  const Dataset d = load_traces(o.traces, o.embeddings, err, "abstract");
  err << "[abstract] fitting " << to_string(c.abstraction_method) << " abstractor\n";
  const Abstractor a = fit_abstractor(c, d);
  write_text(o.out, abstractor_to_json(a).dump() + "\n", out);
  if (!o.out_states.empty()) {
    std::vector<AbstractTrace> states;
    for (const auto& t : d.traces) states.push_back(abstract_trace(a, t));
    write_abstract_traces(states, o.out_states);
  }
  err << "[abstract] " << a.n_states() << " abstract states, pca k = " << a.pca.k() << "\n";
  return kExitOk;
}

int run_train(const Options& o, std::ostream& out, std::ostream& err) {
  const DetectorConfig c = load_config(o.config, o.seed);
  const Dataset d = load_traces(o.traces, o.embeddings, err, "train");
  err << "[train] fitting " << to_string(c.abstraction_method) << " + " << to_string(c.model_type) << " on " << d.size()
      << " traces\n";
  const DetectorModel model = train_pipeline(c, d, created_at_from_env());
  write_text(o.out, serialize_detector(model), out);
  err << "[train] wrote " << (o.out.empty() ? "stdout" : o.out) << "\n";
  return kExitOk;
}

int run_detect(const Options& o, std::ostream& out, std::ostream& err) {
  DetectorModel model = load_model(o.model);
  if (o.threshold) model.config.threshold = *o.threshold;
  const Dataset d = load_traces(o.traces, o.embeddings, err, "detect");
  const auto results = detect_batch(model, d.traces, thread_budget());
  std::string text;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    json j{{"id", r.trace_id}, {"score", r.score}, {"label_pred", to_int(r.hard_label)}};
    if (r.token_scores) j["token_scores"] = *r.token_scores;
    if (d.traces[i].label) j["label"] = to_int(*d.traces[i].label);
    text += j.dump() + "\n";
  }
  write_text(o.out, text, out);
  err << "[detect] scored " << results.size() << " traces\n";
  return kExitOk;
}

int run_explain(const Options& o, std::ostream& out, std::ostream& err) {
  const DetectorModel model = load_model(o.model);
  if (model.model_type() != ModelType::hmm) throw ValidationError("token scores require hmm model");
  if (o.traces.empty() || o.embeddings.empty()) throw UsageError("explain needs --traces and --embeddings");
  const Dataset d = load_traces(o.traces, o.embeddings, err, "explain");
  const auto it = std::find_if(d.traces.begin(), d.traces.end(), [&](const auto& t) { return t.id == o.trace_id; });
  if (it == d.traces.end()) throw ValidationError("no trace with id " + o.trace_id);
  const auto scores = explain(model, *it);
  const auto result = detect(model, *it);
  std::ostringstream table;
  table << "trace " << it->id << "  Pr(y=1|o) = " << result.score << "\n";
  table << "  t  token                 score\n";
  for (std::size_t t = 0; t < scores.size(); ++t) {
    char line[128];
    std::snprintf(line, sizeof line, "%3zu  %-20s  %.4f\n", t, it->tokens[t].c_str(), scores[t]);
    table << line;
  }
  out << table.str();
  return kExitOk;
}

int run_eval(const Options& o, std::ostream& out, std::ostream&) {
  const auto records = read_ndjson(o.scores);
  std::map<std::string, Label> label_of;
  if (!o.labels.empty()) {
    for (const auto& j : read_ndjson(o.labels)) {
      if (j.contains("label") && !j["label"].is_null()) label_of[j.at("id").get<std::string>()] = label_from_int(j["label"].get<int>());
    }
  }
  std::vector<double> scores;
  std::vector<Label> labels;
  for (const auto& j : records) {
    const std::string id = j.at("id").get<std::string>();
    scores.push_back(j.at("score").get<double>());
    if (auto it = label_of.find(id); it != label_of.end()) {
      labels.push_back(it->second);
    } else if (j.contains("label") && !j["label"].is_null()) {
      labels.push_back(label_from_int(j["label"].get<int>()));
    } else if (o.labels.empty()) {
      throw UsageError("scores lack labels; pass --labels");
    } else {
      throw ValidationError("no label for trace " + id);
    }
  }
  const double auc = auc_roc(scores, labels);
  out << json{{"auc", auc}, {"n", scores.size()}}.dump() << "\n";
  return kExitOk;
}

int run_gen_synthetic(const Options& o, std::ostream&, std::ostream& err) {
  SyntheticSpec spec;
  if (!o.spec.empty()) {
    spec = synthetic_spec_from_json(read_json_file(o.spec));
  } else if (!o.generator.empty()) {
    spec = synthetic_spec_from_json(json{{"generator", o.generator}});
  }
  if (o.seed) spec.seed = *o.seed;
  const Dataset d = generate_synthetic(spec);
  write_traces(d, o.out_manifest, o.out_bin);
  err << "[gen-synthetic] wrote " << d.size() << " traces\n";
  return kExitOk;
}

int run_split(const Options& o, std::ostream&, std::ostream& err) {
  const Dataset d = load_traces(o.traces, o.embeddings, err, "split");
  SplitSpec spec;
  if (o.fraction) {
    if (!o.train_categories.empty() || !o.test_categories.empty()) {
      throw UsageError("--fraction cannot be combined with category lists");
    }
    spec = FractionSplit{*o.fraction, o.seed.value_or(0)};
  } else if (!o.train_categories.empty() && !o.test_categories.empty()) {
    spec = CategorySplit{o.train_categories, o.test_categories};
  } else {
    throw UsageError("split needs --fraction or both --train-categories and --test-categories");
  }
  const auto [train, test] = split_dataset(d, spec);
  write_traces(train, o.out_train + ".ndjson", o.out_train + ".bin");
  write_traces(test, o.out_test + ".ndjson", o.out_test + ".bin");
  err << "[split] " << train.size() << " train / " << test.size() << " test\n";
  return kExitOk;
}

int run_experiment_cmd(const Options& o, std::ostream& out, std::ostream& err) {
  ExperimentConfig c = experiment_config_from_json(read_json_file(o.config));
  if (!o.out.empty()) c.output = o.out;
  if (o.seed) c.base.seed = *o.seed;
  c.base.threads = thread_budget();
  err << "[experiment] running grid\n";
  const Report r = run_experiment(c);
  out << r.summary();
  return kExitOk;
}

}  // namespace

std::size_t thread_budget() {
  const char* env = std::getenv("POLLMGRAPH_THREADS");
  std::size_t n = 0;
  if (env && *env) {
    try {
      n = static_cast<std::size_t>(std::stoul(env));
    } catch (const std::exception&) {
      n = 0;
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hallucination detection from abstracted hidden-state traces", "pollmgraph"};
  app.require_subcommand(1);
  Options o;

  auto seed_flag = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Seed for every random choice"); };
  auto trace_flags = [&](CLI::App* sub, bool required) {
    auto* t = sub->add_option("--traces", o.traces, "Trace manifest (NDJSON)");
    auto* e = sub->add_option("--embeddings", o.embeddings, "Embedding binary (PLMG)");
    if (required) {
      t->required();
      e->required();
    }
  };

  auto* abstract = app.add_subcommand("abstract", "Fit a PCA + clustering abstractor");
  abstract->add_option("--config", o.config, "Detector config JSON");
  trace_flags(abstract, true);
  abstract->add_option("--out", o.out, "Abstractor JSON output")->required();
  abstract->add_option("--out-states", o.out_states, "Abstract traces NDJSON output");
  seed_flag(abstract);

  auto* train = app.add_subcommand("train", "Train a detector on labelled reference traces");
  train->add_option("--config", o.config, "Detector config JSON");
  trace_flags(train, true);
  train->add_option("--out", o.out, "Detector JSON output")->required();
  seed_flag(train);

  auto* det = app.add_subcommand("detect", "Score traces with a trained detector");
  det->add_option("--model", o.model, "Detector JSON")->required();
  trace_flags(det, true);
  det->add_option("--out", o.out, "Scores NDJSON output (default stdout)");
  det->add_option("--threshold", o.threshold, "Decision threshold on Pr(y=1|o)");

  auto* expl = app.add_subcommand("explain", "Per-token hallucination scores for one trace");
  expl->add_option("--model", o.model, "Detector JSON")->required();
  expl->add_option("--trace-id", o.trace_id, "Trace id")->required();
  trace_flags(expl, false);

  auto* ev = app.add_subcommand("eval", "AUC-ROC of a scores file");
  ev->add_option("--scores", o.scores, "Scores NDJSON")->required();
  ev->add_option("--labels", o.labels, "NDJSON with id and label per trace");

  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic labelled dataset");
  gen->add_option("--spec", o.spec, "Synthetic spec JSON");
  gen->add_option("--generator", o.generator, "two-gaussian-clouds | two-markov-chains | known-hmm");
  gen->add_option("--out-manifest", o.out_manifest, "Manifest output")->required();
  gen->add_option("--out-bin", o.out_bin, "Embedding binary output")->required();
  seed_flag(gen);

  auto* split = app.add_subcommand("split", "Split a dataset by fraction or category");
  trace_flags(split, true);
  split->add_option("--fraction", o.fraction, "Train share in (0, 1)");
  split->add_option("--train-categories", o.train_categories, "Categories for train")->delimiter(',');
  split->add_option("--test-categories", o.test_categories, "Categories for test")->delimiter(',');
  split->add_option("--out-train", o.out_train, "Output prefix for train files")->required();
  split->add_option("--out-test", o.out_test, "Output prefix for test files")->required();
  seed_flag(split);

  auto* exp = app.add_subcommand("experiment", "Run an evaluation grid");
  exp->add_option("--config", o.config, "Experiment config JSON")->required();
  exp->add_option("--out", o.out, "Report NDJSON output");
  seed_flag(exp);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (abstract->parsed()) return run_abstract(o, out, err);
    if (train->parsed()) return run_train(o, out, err);
    if (det->parsed()) return run_detect(o, out, err);
    if (expl->parsed()) return run_explain(o, out, err);
    if (ev->parsed()) return run_eval(o, out, err);
    if (gen->parsed()) return run_gen_synthetic(o, out, err);
    if (split->parsed()) return run_split(o, out, err);
    if (exp->parsed()) return run_experiment_cmd(o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.get_subcommands().front()->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace pollmgraph::cli
