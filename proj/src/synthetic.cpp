#include "pollmgraph/synthetic.hpp"

#include <cmath>
#include <random>

#include "pollmgraph/codec.hpp"
#include "pollmgraph/errors.hpp"

namespace pollmgraph {

namespace {

std::size_t draw(const double* probs, Eigen::Index size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < size; ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<std::size_t>(i);
  }
  // Rounding left u above the total; take the last state with mass.
  for (Eigen::Index i = size - 1; i > 0; --i) {
    if (probs[i] > 0.0) return static_cast<std::size_t>(i);
  }
  return 0;
}

void check_stochastic(const Vector& v, const std::string& what) {
  if (v.size() == 0 || (v.array() < 0.0).any() || std::abs(v.sum() - 1.0) > 1e-9) {
    throw ValidationError(what + " must be a non-empty probability vector");
  }
}

void check_stochastic(const Matrix& m, Eigen::Index cols, const std::string& what) {
  if (m.cols() != cols) throw ValidationError(what + " has " + std::to_string(m.cols()) + " columns, expected " + std::to_string(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) check_stochastic(Vector(m.row(r).transpose()), what + " row " + std::to_string(r));
}

const Hmm& class_hmm(const SyntheticSpec& spec, int y) {
  return (y == 1 && spec.hmm[1].pi.size() > 0) ? spec.hmm[1] : spec.hmm[0];
}

void validate(const SyntheticSpec& spec) {
  if (spec.n_traces < 1) throw ValidationError("n_traces must be >= 1");
  if (spec.min_length < 1 || spec.max_length < spec.min_length) throw ValidationError("need 1 <= min_length <= max_length");
  if (spec.dim < 1) throw ValidationError("dim must be >= 1");
  if (!(spec.noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  switch (spec.generator) {
    case Generator::two_gaussian_clouds:
      if (spec.modes_per_class < 1) throw ValidationError("modes_per_class must be >= 1");
      break;
    case Generator::two_markov_chains:
      for (int y = 0; y < 2; ++y) {
        const std::string tag = "class " + std::to_string(y) + " chain";
        check_stochastic(spec.chain_initial[y], tag + " initial");
        if (spec.chain_transition[y].rows() != spec.chain_initial[y].size()) throw ValidationError(tag + " shape mismatch");
        check_stochastic(spec.chain_transition[y], spec.chain_initial[y].size(), tag + " transition");
      }
      if (spec.chain_initial[0].size() != spec.chain_initial[1].size()) throw ValidationError("chains use different alphabets");
      break;
    case Generator::known_hmm:
      for (int y = 0; y < 2; ++y) {
        const Hmm& h = class_hmm(spec, y);
        const std::string tag = "class " + std::to_string(y) + " hmm";
        check_stochastic(h.pi, tag + " pi");
        if (h.transition.rows() != h.pi.size() || h.emission.rows() != h.pi.size()) throw ValidationError(tag + " shape mismatch");
        check_stochastic(h.transition, h.pi.size(), tag + " transition");
        check_stochastic(h.emission, h.emission.cols(), tag + " emission");
      }
      if (class_hmm(spec, 0).emission.cols() != class_hmm(spec, 1).emission.cols()) {
        throw ValidationError("class hmms use different alphabets");
      }
      break;
  }
}

struct Generated {
  Dataset dataset;
  std::vector<AbstractTrace> symbols;
};

Generated generate(const SyntheticSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto dim = static_cast<Eigen::Index>(spec.dim);
  const double sigma = spec.noise_sigma;

  // Centre table indexed by symbol.
  Matrix centres;
  if (spec.generator == Generator::two_gaussian_clouds) {
    const auto modes = static_cast<Eigen::Index>(spec.modes_per_class);
    const Vector direction = Vector::Ones(dim) / std::sqrt(static_cast<double>(dim));
    centres.resize(2 * modes, dim);
    for (int y = 0; y < 2; ++y) {
      const Vector mean = (spec.identical_classes ? 0.0 : y * spec.separation * sigma) * direction;
      for (Eigen::Index m = 0; m < modes; ++m) {
        for (Eigen::Index d = 0; d < dim; ++d) centres(y * modes + m, d) = mean(d) + spec.mode_spread * sigma * normal(rng);
      }
    }
    if (spec.identical_classes) centres.bottomRows(modes) = centres.topRows(modes);
  } else {
    const Eigen::Index alphabet = spec.generator == Generator::two_markov_chains ? spec.chain_initial[0].size()
                                                                                 : spec.hmm[0].emission.cols();
    centres.resize(alphabet, dim);
    for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = spec.symbol_spread * sigma * normal(rng);
  }

  std::uniform_int_distribution<std::size_t> length_dist(spec.min_length, spec.max_length);
  std::uniform_int_distribution<std::size_t> mode_dist(0, std::max<std::size_t>(spec.modes_per_class, 1) - 1);
  Generated out;
  out.dataset.metadata["generator"] = spec.generator == Generator::two_gaussian_clouds ? "two-gaussian-clouds"
                                      : spec.generator == Generator::two_markov_chains  ? "two-markov-chains"
                                                                                        : "known-hmm";
  const int width = static_cast<int>(std::to_string(spec.n_traces).size());
  for (std::size_t i = 0; i < spec.n_traces; ++i) {
    const int y = static_cast<int>(i % 2);
    const std::size_t n = length_dist(rng);
    std::vector<Symbol> symbols(n);
    switch (spec.generator) {
      case Generator::two_gaussian_clouds: {
        const std::size_t cls = spec.identical_classes ? 0 : static_cast<std::size_t>(y);
        for (auto& s : symbols) s = static_cast<Symbol>(cls * spec.modes_per_class + mode_dist(rng));
        break;
      }
      case Generator::two_markov_chains: {
        const Vector& init = spec.chain_initial[y];
        const Matrix& trans = spec.chain_transition[y];
        symbols[0] = static_cast<Symbol>(draw(init.data(), init.size(), rng));
        for (std::size_t t = 1; t < n; ++t) {
          symbols[t] = static_cast<Symbol>(draw(trans.row(symbols[t - 1]).data(), trans.cols(), rng));
        }
        break;
      }
      case Generator::known_hmm: {
        const Hmm& h = class_hmm(spec, y);
        std::size_t state = draw(h.pi.data(), h.pi.size(), rng);
        for (std::size_t t = 0; t < n; ++t) {
          state = draw(h.transition.row(static_cast<Eigen::Index>(state)).data(), h.transition.cols(), rng);
          symbols[t] = static_cast<Symbol>(draw(h.emission.row(static_cast<Eigen::Index>(state)).data(), h.emission.cols(), rng));
        }
        break;
      }
    }

    std::string id = std::to_string(i);
    id = "syn" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    ConcreteTrace trace;
    trace.id = id;
    trace.label = static_cast<Label>(y);
    if (spec.n_categories > 0) trace.category = "cat" + std::to_string(i % spec.n_categories);
    trace.embeddings.resize(static_cast<Eigen::Index>(n), dim);
    for (std::size_t t = 0; t < n; ++t) {
      trace.tokens.push_back("w" + std::to_string(t));
      for (Eigen::Index d = 0; d < dim; ++d) {
        trace.embeddings(static_cast<Eigen::Index>(t), d) = centres(symbols[t], d) + sigma * normal(rng);
      }
    }
    out.symbols.push_back(AbstractTrace{id, std::move(symbols), trace.label});
    out.dataset.traces.push_back(std::move(trace));
  }
  return out;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) { return generate(spec).dataset; }

std::vector<AbstractTrace> generate_symbols(const SyntheticSpec& spec) { return generate(spec).symbols; }

std::vector<AbstractTrace> sample_hmm(const Hmm& hmm, std::size_t count, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<AbstractTrace> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    AbstractTrace t;
    t.id = "h" + std::to_string(i);
    std::size_t state = draw(hmm.pi.data(), hmm.pi.size(), rng);
    for (std::size_t k = 0; k < length; ++k) {
      state = draw(hmm.transition.row(static_cast<Eigen::Index>(state)).data(), hmm.transition.cols(), rng);
      t.states.push_back(static_cast<Symbol>(draw(hmm.emission.row(static_cast<Eigen::Index>(state)).data(), hmm.emission.cols(), rng)));
    }
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

Vector vector_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix matrix_from(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != m.cols()) throw ValidationError("ragged matrix in synthetic spec");
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    const std::string gen = codec::field(j, "generator").get<std::string>();
    if (gen == "two-gaussian-clouds") s.generator = Generator::two_gaussian_clouds;
    else if (gen == "two-markov-chains") s.generator = Generator::two_markov_chains;
    else if (gen == "known-hmm") s.generator = Generator::known_hmm;
    else throw ValidationError("unknown generator \"" + gen + "\"");

    s.n_traces = j.value("n_traces", s.n_traces);
    s.min_length = j.value("min_length", s.min_length);
    s.max_length = j.value("max_length", s.max_length);
    s.dim = j.value("dim", s.dim);
    s.seed = j.value("seed", s.seed);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.n_categories = j.value("n_categories", s.n_categories);
    s.separation = j.value("separation", s.separation);
    s.modes_per_class = j.value("modes_per_class", s.modes_per_class);
    s.mode_spread = j.value("mode_spread", s.mode_spread);
    s.identical_classes = j.value("identical_classes", s.identical_classes);
    s.symbol_spread = j.value("symbol_spread", s.symbol_spread);
    if (j.contains("chains")) {
      const auto& c = j["chains"];
      if (c.size() != 2) throw ValidationError("\"chains\" needs one entry per class");
      for (int y = 0; y < 2; ++y) {
        s.chain_initial[y] = vector_from(codec::field(c[y], "initial"));
        s.chain_transition[y] = matrix_from(codec::field(c[y], "transition"));
      }
    }
    if (j.contains("hmm")) {
      const auto& h = j["hmm"];
      if (h.empty() || h.size() > 2) throw ValidationError("\"hmm\" needs one or two entries");
      for (std::size_t y = 0; y < h.size(); ++y) {
        s.hmm[y].pi = vector_from(codec::field(h[y], "pi"));
        s.hmm[y].transition = matrix_from(codec::field(h[y], "transition"));
        s.hmm[y].emission = matrix_from(codec::field(h[y], "emission"));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad synthetic spec: ") + e.what());
  }
  return s;
}

}  // namespace pollmgraph
