#include "pollmgraph/experiment.hpp"

#include <cstdio>
#include <fstream>

#include "pollmgraph/codec.hpp"
#include "pollmgraph/errors.hpp"
#include "pollmgraph/trace_io.hpp"

namespace pollmgraph {

using nlohmann::json;

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("base")) c.base = config_from_json(j["base"]);
    if (j.contains("n_states")) c.n_states = j["n_states"].get<std::vector<std::size_t>>();
    if (j.contains("n_hidden")) c.n_hidden = j["n_hidden"].get<std::vector<std::size_t>>();
    if (j.contains("pca_dims")) {
      for (const auto& v : j["pca_dims"]) c.pca_dims.push_back(v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>()));
    }
    if (j.contains("methods")) {
      for (const auto& v : j["methods"]) c.methods.push_back(abstraction_method_from_string(v.get<std::string>()));
    }
    if (j.contains("model_types")) {
      for (const auto& v : j["model_types"]) c.model_types.push_back(model_type_from_string(v.get<std::string>()));
    }
    if (j.contains("synthetic")) c.synthetic = synthetic_spec_from_json(j["synthetic"]);
    auto files = [](const json& f) {
      return TraceFiles{codec::field(f, "manifest").get<std::string>(), codec::field(f, "embeddings").get<std::string>()};
    };
    if (j.contains("dataset")) c.dataset = files(j["dataset"]);
    if (j.contains("test_dataset")) c.test_dataset = files(j["test_dataset"]);
    if (j.contains("fractions")) c.fractions = j["fractions"].get<std::vector<double>>();
    if (j.contains("categories")) {
      const auto& cat = j["categories"];
      c.categories = CategorySplit{codec::field(cat, "train").get<std::vector<std::string>>(),
                                   codec::field(cat, "test").get<std::vector<std::string>>()};
    }
    c.split_seed = j.value("split_seed", c.split_seed);
    c.repetitions = j.value("repetitions", c.repetitions);
    if (j.contains("output")) c.output = j["output"].get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad experiment config: ") + e.what());
  }
  if (c.synthetic.has_value() == c.dataset.has_value()) {
    throw ValidationError("experiment needs exactly one of \"synthetic\" or \"dataset\"");
  }
  if (c.test_dataset && c.categories) throw ValidationError("cross-dataset runs cannot also split by category");
  if (c.repetitions < 1) throw ValidationError("repetitions must be >= 1");
  for (double f : c.fractions) {
    if (!(f > 0.0 && f < 1.0)) throw ValidationError("fractions must lie in (0, 1)");
  }
  return c;
}

std::string Report::to_ndjson() const {
  std::string out;
  for (const auto& c : cells) {
    json j{{"cell", c.cell},
           {"auc", c.auc ? json(*c.auc) : json(nullptr)},
           {"n_train", c.n_train},
           {"n_test", c.n_test},
           {"seed", c.seed}};
    if (c.error) j["error"] = *c.error;
    out += j.dump() + "\n";
  }
  return out;
}

std::string Report::summary() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-5s %-7s %-4s %8s %8s %8s %8s %8s %8s  %s\n", "cell", "method", "mdl", "N_s", "N_h",
                "pca", "split", "n_test", "auc", "error");
  out += line;
  for (const auto& c : cells) {
    const json& k = c.cell;
    const std::string pca = k["pca_dim"].is_null() ? "auto" : std::to_string(k["pca_dim"].get<std::size_t>());
    const std::string split = k.contains("fraction") ? std::to_string(k["fraction"].get<double>()).substr(0, 5) : "-";
    const std::string auc = c.auc ? std::to_string(*c.auc).substr(0, 6) : "-";
    std::snprintf(line, sizeof line, "%-5zu %-7s %-4s %8zu %8zu %8s %8s %8zu %8s  %s\n", c.index,
                  k["abstraction_method"].get<std::string>().c_str(), k["model_type"].get<std::string>().c_str(),
                  k["n_states"].get<std::size_t>(), k["n_hidden"].get<std::size_t>(), pca.c_str(), split.c_str(),
                  c.n_test, auc.c_str(), c.error.value_or("").c_str());
    out += line;
  }
  return out;
}

namespace {

template <typename T>
std::vector<T> axis(const std::vector<T>& values, const T& fallback) {
  return values.empty() ? std::vector<T>{fallback} : values;
}

}  // namespace

Report run_experiment(const ExperimentConfig& config) {
  Dataset full;
  std::optional<Dataset> held_out;
  if (config.synthetic) {
    full = generate_synthetic(*config.synthetic);
  } else {
    full = read_traces(config.dataset->manifest, config.dataset->embeddings);
    if (config.test_dataset) held_out = read_traces(config.test_dataset->manifest, config.test_dataset->embeddings);
  }

  const auto methods = axis(config.methods, config.base.abstraction_method);
  const auto models = axis(config.model_types, config.base.model_type);
  const auto states = axis(config.n_states, config.base.n_states);
  const auto hidden = axis(config.n_hidden, config.base.n_hidden);
  const auto pcas = axis(config.pca_dims, config.base.pca_dim);
  // Fractions only matter for the random split protocol.
  const std::vector<double> fractions =
      (config.categories || held_out) ? std::vector<double>{0.0} : axis(config.fractions, 0.5);

  Report report;
  for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
    for (double fraction : fractions) {
      for (AbstractionMethod method : methods) {
        for (ModelType model_type : models) {
          for (std::size_t ns : states) {
            for (std::size_t nh : hidden) {
              for (const auto& pca : pcas) {
                DetectorConfig dc = config.base;
                dc.abstraction_method = method;
                dc.model_type = model_type;
                dc.n_states = ns;
                dc.n_hidden = nh;
                dc.pca_dim = pca;
                dc.seed = config.base.seed + rep;

                CellResult cell;
                cell.index = report.cells.size();
                cell.seed = dc.seed;
                cell.cell = config_to_json(dc);
                cell.cell["repetition"] = rep;
                if (fraction > 0.0) cell.cell["fraction"] = fraction;
                try {
                  std::pair<Dataset, Dataset> parts;
                  if (held_out) {
                    parts = {full, *held_out};
                  } else if (config.categories) {
                    parts = split_dataset(full, *config.categories);
                  } else {
                    parts = split_dataset(full, FractionSplit{fraction, config.split_seed + rep});
                  }
                  cell.n_train = parts.first.size();
                  cell.n_test = parts.second.size();
                  const DetectorModel model = train_pipeline(dc, parts.first);
                  const auto results = detect_batch(model, parts.second.traces, config.base.threads);
                  std::vector<double> scores;
                  std::vector<Label> labels;
                  for (std::size_t i = 0; i < results.size(); ++i) {
                    const auto& label = parts.second.traces[i].label;
                    if (!label) throw ValidationError("test trace " + parts.second.traces[i].id + " is unlabeled");
                    scores.push_back(results[i].score);
                    labels.push_back(*label);
                  }
                  cell.auc = auc_roc(scores, labels);
                } catch (const Error& e) {
                  cell.error = e.what();
                }
                report.cells.push_back(std::move(cell));
              }
            }
          }
        }
      }
    }
  }

  if (config.output) {
    std::ofstream out(*config.output, std::ios::trunc);
    if (!out) throw Error("cannot open " + config.output->string() + " for writing");
    out << report.to_ndjson();
  }
  return report;
}

}  // namespace pollmgraph
