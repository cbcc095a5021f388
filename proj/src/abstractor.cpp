#include "pollmgraph/abstraction.hpp"
#include "pollmgraph/errors.hpp"

namespace pollmgraph {

std::string to_string(AbstractionMethod m) {
  switch (m) {
    case AbstractionMethod::grid: return "grid";
    case AbstractionMethod::gmm: return "gmm";
    case AbstractionMethod::kmeans: return "kmeans";
  }
  return "unknown";
}

AbstractionMethod abstraction_method_from_string(const std::string& s) {
  if (s == "grid") return AbstractionMethod::grid;
  if (s == "gmm") return AbstractionMethod::gmm;
  if (s == "kmeans") return AbstractionMethod::kmeans;
  throw ValidationError("unknown abstraction method \"" + s + "\" (expected grid, gmm or kmeans)");
}

AbstractionMethod Abstractor::method() const {
  return static_cast<AbstractionMethod>(backend.index());
}

std::size_t Abstractor::n_states() const {
  return std::visit([](const auto& b) { return b.n_states(); }, backend);
}

std::vector<Symbol> Abstractor::symbols(const Matrix& embeddings) const {
  const Matrix projected = pca.project(embeddings);
  std::vector<Symbol> out(static_cast<std::size_t>(projected.rows()));
  std::visit(
      [&](const auto& b) {
        for (Eigen::Index r = 0; r < projected.rows(); ++r) out[static_cast<std::size_t>(r)] = b.assign(projected.row(r).data());
      },
      backend);
  return out;
}

AbstractTrace abstract_trace(const Abstractor& abstractor, const ConcreteTrace& trace) {
  if (trace.embeddings.cols() != abstractor.pca.input_dim()) {
    throw ValidationError("width mismatch for trace " + trace.id + ": abstractor expects " +
                          std::to_string(abstractor.pca.input_dim()) + ", got " +
                          std::to_string(trace.embeddings.cols()));
  }
  if (trace.embeddings.rows() == 0) throw ValidationError("empty trace " + trace.id);
  return AbstractTrace{trace.id, abstractor.symbols(trace.embeddings), trace.label};
}

}  // namespace pollmgraph
