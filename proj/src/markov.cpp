#include "pollmgraph/markov.hpp"

#include <cmath>

#include "pollmgraph/errors.hpp"
#include "pollmgraph/numeric.hpp"

namespace pollmgraph {

namespace {

void check_symbols(const AbstractTrace& trace, std::size_t n_states) {
  if (trace.states.empty()) throw ValidationError("empty trace " + trace.id);
  for (Symbol s : trace.states) {
    if (s >= n_states) {
      throw ValidationError("symbol " + std::to_string(s) + " in trace " + trace.id + " >= alphabet size " +
                            std::to_string(n_states));
    }
  }
}

}  // namespace

LabeledMarkovModel fit_mm(const std::vector<AbstractTrace>& traces, std::size_t n_states, double epsilon) {
  if (n_states < 1) throw ValidationError("Markov model needs at least one state");
  if (!(epsilon >= 0.0)) throw ValidationError("smoothing must be >= 0");
  const auto counts = require_labels(traces);
  const auto ns = static_cast<Eigen::Index>(n_states);

  LabeledMarkovModel mm;
  mm.n_states = n_states;
  mm.smoothing = epsilon;
  mm.prior = static_cast<double>(counts[1]) / static_cast<double>(counts[0] + counts[1]);
  for (int y = 0; y < 2; ++y) {
    mm.initial[y] = Vector::Zero(ns);
    mm.transitions[y] = Matrix::Zero(ns, ns);
  }
  for (const auto& t : traces) {
    check_symbols(t, n_states);
    const int y = to_int(*t.label);
    mm.initial[y](t.states.front()) += 1.0;
    for (std::size_t i = 1; i < t.states.size(); ++i) mm.transitions[y](t.states[i - 1], t.states[i]) += 1.0;
  }

  const double uniform = 1.0 / static_cast<double>(n_states);
  for (int y = 0; y < 2; ++y) {
    mm.initial[y] = (mm.initial[y].array() + epsilon) / (static_cast<double>(counts[y]) + epsilon * static_cast<double>(n_states));
    for (Eigen::Index a = 0; a < ns; ++a) {
      const double total = mm.transitions[y].row(a).sum() + epsilon * static_cast<double>(n_states);
      if (total > 0.0) {
        mm.transitions[y].row(a) = (mm.transitions[y].row(a).array() + epsilon) / total;
      } else {
        mm.transitions[y].row(a).setConstant(uniform);
      }
    }
  }
  return mm;
}

double mm_log_likelihood(const LabeledMarkovModel& model, const AbstractTrace& trace, Label y) {
  check_symbols(trace, model.n_states);
  const int c = to_int(y);
  double ll = safe_log(model.initial[c](trace.states.front()));
  for (std::size_t i = 1; i < trace.states.size(); ++i) {
    ll += safe_log(model.transitions[c](trace.states[i - 1], trace.states[i]));
  }
  return ll;
}

double mm_posterior(const LabeledMarkovModel& model, const AbstractTrace& trace, std::optional<double> prior_override) {
  const double prior = prior_override.value_or(model.prior);
  const double s0 = safe_log(1.0 - prior) + mm_log_likelihood(model, trace, Label::factual);
  const double s1 = safe_log(prior) + mm_log_likelihood(model, trace, Label::hallucination);
  return posterior_from_scores(s0, s1, prior);
}

}  // namespace pollmgraph
