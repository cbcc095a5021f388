#include "pollmgraph/serialize.hpp"

#include "pollmgraph/codec.hpp"
#include "pollmgraph/errors.hpp"

namespace pollmgraph {

using nlohmann::json;
using codec::field;
using codec::matrix_from_json;
using codec::matrix_to_json;
using codec::vector_from_json;
using codec::vector_to_json;

void check_schema_version(const json& j) {
  const int v = field(j, "schema_version").get<int>();
  if (v != kSchemaVersion) {
    throw VersionError("unsupported schema_version " + std::to_string(v) + " (this build reads " +
                       std::to_string(kSchemaVersion) + ")");
  }
}

namespace {

json grid_to_json(const GridAbstractor& g) {
  return json{{"intervals", g.intervals},
              {"lower", g.lower},
              {"upper", g.upper},
              {"degenerate_dims", g.degenerate_dims},
              {"label_order", "row-major"}};
}

GridAbstractor grid_from_json(const json& j) {
  GridAbstractor g;
  g.intervals = field(j, "intervals").get<std::size_t>();
  g.lower = field(j, "lower").get<std::vector<double>>();
  g.upper = field(j, "upper").get<std::vector<double>>();
  g.degenerate_dims = field(j, "degenerate_dims").get<std::vector<std::size_t>>();
  if (g.lower.size() != g.upper.size() || g.lower.empty() || g.intervals < 1) throw FormatError("malformed grid abstractor");
  return g;
}

json gmm_to_json(const GmmAbstractor& g) {
  return json{{"weights", vector_to_json(g.weights)},
              {"means", matrix_to_json(g.means)},
              {"variances", matrix_to_json(g.variances)},
              {"fit_log_likelihood", g.fit_log_likelihood},
              {"train_log", g.train_log},
              {"reseeds", g.reseeds}};
}

GmmAbstractor gmm_from_json(const json& j) {
  GmmAbstractor g;
  g.weights = vector_from_json(field(j, "weights"));
  g.means = matrix_from_json(field(j, "means"));
  g.variances = matrix_from_json(field(j, "variances"));
  g.fit_log_likelihood = field(j, "fit_log_likelihood").get<double>();
  g.train_log = field(j, "train_log").get<std::vector<double>>();
  g.reseeds = field(j, "reseeds").get<std::size_t>();
  if (g.means.rows() != g.weights.size() || g.variances.rows() != g.weights.size() ||
      g.means.cols() != g.variances.cols()) {
    throw FormatError("malformed gmm abstractor");
  }
  return g;
}

json kmeans_to_json(const KmeansAbstractor& k) {
  return json{{"centroids", matrix_to_json(k.centroids)}, {"inertia_log", k.inertia_log}};
}

KmeansAbstractor kmeans_from_json(const json& j) {
  KmeansAbstractor k;
  k.centroids = matrix_from_json(field(j, "centroids"));
  k.inertia_log = field(j, "inertia_log").get<std::vector<double>>();
  if (k.centroids.rows() < 1) throw FormatError("malformed kmeans abstractor");
  return k;
}

}  // namespace

json abstractor_to_json(const Abstractor& a) {
  json j{{"schema_version", kSchemaVersion},
         {"backend", to_string(a.method())},
         {"pca",
          {{"mean", vector_to_json(a.pca.mean)},
           {"components", matrix_to_json(a.pca.components)},
           {"variances", vector_to_json(a.pca.variances)},
           {"explained_loss", a.pca.explained_loss}}}};
  std::visit(
      [&](const auto& b) {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, GridAbstractor>) j["grid"] = grid_to_json(b);
        if constexpr (std::is_same_v<B, GmmAbstractor>) j["gmm"] = gmm_to_json(b);
        if constexpr (std::is_same_v<B, KmeansAbstractor>) j["kmeans"] = kmeans_to_json(b);
      },
      a.backend);
  return j;
}

Abstractor abstractor_from_json(const json& j) {
  check_schema_version(j);
  Abstractor a;
  const json& pca = field(j, "pca");
  a.pca.mean = vector_from_json(field(pca, "mean"));
  a.pca.components = matrix_from_json(field(pca, "components"));
  a.pca.variances = vector_from_json(field(pca, "variances"));
  a.pca.explained_loss = field(pca, "explained_loss").get<double>();
  if (a.pca.components.cols() != a.pca.mean.size()) throw FormatError("malformed pca projector");

  const auto backend = field(j, "backend").get<std::string>();
  switch (abstraction_method_from_string(backend)) {
    case AbstractionMethod::grid: a.backend = grid_from_json(field(j, "grid")); break;
    case AbstractionMethod::gmm: a.backend = gmm_from_json(field(j, "gmm")); break;
    case AbstractionMethod::kmeans: a.backend = kmeans_from_json(field(j, "kmeans")); break;
  }
  return a;
}

json markov_to_json(const LabeledMarkovModel& mm) {
  return json{{"schema_version", kSchemaVersion},
              {"model_type", "mm"},
              {"n_states", mm.n_states},
              {"prior", mm.prior},
              {"smoothing", mm.smoothing},
              {"initial", {vector_to_json(mm.initial[0]), vector_to_json(mm.initial[1])}},
              {"transitions", {matrix_to_json(mm.transitions[0]), matrix_to_json(mm.transitions[1])}}};
}

LabeledMarkovModel markov_from_json(const json& j) {
  check_schema_version(j);
  if (field(j, "model_type").get<std::string>() != "mm") throw FormatError("expected model_type \"mm\"");
  LabeledMarkovModel mm;
  mm.n_states = field(j, "n_states").get<std::size_t>();
  mm.prior = field(j, "prior").get<double>();
  mm.smoothing = field(j, "smoothing").get<double>();
  const json& init = field(j, "initial");
  const json& trans = field(j, "transitions");
  if (init.size() != 2 || trans.size() != 2) throw FormatError("markov model needs two classes");
  for (int y = 0; y < 2; ++y) {
    mm.initial[y] = vector_from_json(init[y]);
    mm.transitions[y] = matrix_from_json(trans[y]);
    const auto ns = static_cast<Eigen::Index>(mm.n_states);
    if (mm.initial[y].size() != ns || mm.transitions[y].rows() != ns || mm.transitions[y].cols() != ns) {
      throw FormatError("markov model shape does not match n_states");
    }
  }
  return mm;
}

json hmm_to_json(const Hmm& hmm, const SemanticBinding* binding) {
  json j{{"schema_version", kSchemaVersion},
         {"model_type", "hmm"},
         {"n_hidden", hmm.n_hidden()},
         {"n_obs", hmm.n_obs()},
         {"pi", vector_to_json(hmm.pi)},
         {"transition", matrix_to_json(hmm.transition)},
         {"emission", matrix_to_json(hmm.emission)},
         {"train_log", hmm.train_log}};
  if (binding) {
    j["semantics"] = json{{"prior", binding->prior},
                          {"smoothing", binding->smoothing},
                          {"state_given_label",
                           {vector_to_json(binding->state_given_label[0]), vector_to_json(binding->state_given_label[1])}}};
  }
  return j;
}

Hmm hmm_from_json(const json& j) {
  check_schema_version(j);
  if (field(j, "model_type").get<std::string>() != "hmm") throw FormatError("expected model_type \"hmm\"");
  Hmm hmm;
  hmm.pi = vector_from_json(field(j, "pi"));
  hmm.transition = matrix_from_json(field(j, "transition"));
  hmm.emission = matrix_from_json(field(j, "emission"));
  hmm.train_log = field(j, "train_log").get<std::vector<double>>();
  const Eigen::Index h = hmm.pi.size();
  if (hmm.transition.rows() != h || hmm.transition.cols() != h || hmm.emission.rows() != h) {
    throw FormatError("hmm parameter shapes disagree");
  }
  return hmm;
}

SemanticBinding semantics_from_json(const json& j) {
  const json& s = field(j, "semantics");
  SemanticBinding b;
  b.prior = field(s, "prior").get<double>();
  b.smoothing = field(s, "smoothing").get<double>();
  const json& sg = field(s, "state_given_label");
  if (sg.size() != 2) throw FormatError("semantics need two classes");
  for (int y = 0; y < 2; ++y) b.state_given_label[y] = vector_from_json(sg[y]);
  return b;
}

}  // namespace pollmgraph
