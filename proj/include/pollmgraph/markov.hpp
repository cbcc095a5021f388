#pragma once

#include <array>
#include <optional>

#include "pollmgraph/trace.hpp"

namespace pollmgraph {

inline constexpr double kDefaultSmoothing = 1e-6;

// First-order Markov chain per class y over the abstract-state alphabet.
struct LabeledMarkovModel {
  std::size_t n_states = 0;
  double prior = 0.5;  // Pr(y = 1)
  std::array<Vector, 2> initial;      // Pr(o_1 | y)
  std::array<Matrix, 2> transitions;  // Pr(o_t | o_{t-1}, y), row-stochastic
  double smoothing = 0.0;
};

// Counts with additive smoothing `epsilon`. Rows with no observed transitions
// (possible only when epsilon == 0) become uniform.
LabeledMarkovModel fit_mm(const std::vector<AbstractTrace>& traces, std::size_t n_states, double epsilon);

// log Pr(o_{1:n} | y); the class prior is not included.
double mm_log_likelihood(const LabeledMarkovModel& model, const AbstractTrace& trace, Label y);

// Pr(y = 1 | o_{1:n}). `prior_override` replaces the fitted Pr(y = 1).
double mm_posterior(const LabeledMarkovModel& model, const AbstractTrace& trace,
                    std::optional<double> prior_override = std::nullopt);

}  // namespace pollmgraph
