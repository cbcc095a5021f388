#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "pollmgraph/trace.hpp"

namespace pollmgraph {

inline constexpr std::size_t kDefaultHiddenStates = 100;

// Discrete HMM where s_0 is drawn from `pi` and emits nothing; observation
// o_t (t >= 1) is emitted by s_t.
struct Hmm {
  Vector pi;          // N_h
  Matrix transition;  // N_h x N_h, Pr(s_t | s_{t-1})
  Matrix emission;    // N_h x N_s, Pr(o_t | s_t)
  std::vector<double> train_log;  // total log-likelihood of the parameters entering each EM iteration

  std::size_t n_hidden() const { return static_cast<std::size_t>(pi.size()); }
  std::size_t n_obs() const { return static_cast<std::size_t>(emission.cols()); }
};

struct HmmOptions {
  std::size_t n_hidden = kDefaultHiddenStates;
  std::uint64_t seed = 0;
  std::size_t max_iter = 200;
  double tol = 1e-4;  // on the total log-likelihood gain
  std::size_t threads = 1;  // E-step workers; results do not depend on this
  std::size_t n_starts = 5;     // random starts, each run for start_iter iterations
  std::size_t start_iter = 10;  // before the best one continues to max_iter
};

// Multi-sequence Baum-Welch from Dirichlet(1) random rows. Labels are ignored.
// train_log covers the start that was kept, from its first iteration.
Hmm fit_hmm(const std::vector<AbstractTrace>& traces, std::size_t n_obs, const HmmOptions& options);

// log Pr(o_{1:n}); -infinity when the trace is impossible.
double forward_log_likelihood(const Hmm& hmm, const AbstractTrace& trace);

struct DecodedPath {
  std::vector<std::size_t> states;  // s_0 .. s_n
  double log_prob = 0.0;            // log Pr(s_{0:n}, o_{1:n})
};

// Most probable hidden path; ties resolve to the lowest state index.
DecodedPath viterbi(const Hmm& hmm, const AbstractTrace& trace);

// Pr(s | y) from Viterbi-decoded reference traces, plus the class prior.
struct SemanticBinding {
  double prior = 0.5;  // Pr(y = 1)
  std::array<Vector, 2> state_given_label;
  double smoothing = 0.0;
};

// Counts every decoded state s_0..s_n of each class-y trace.
SemanticBinding bind_semantics(const Hmm& hmm, const std::vector<AbstractTrace>& traces, double epsilon);

// Per-class scores log Pr(y) + sum_t log sum_s Pr(s|y) Pr(o_t|s).
std::array<double, 2> hmm_class_scores(const Hmm& hmm, const SemanticBinding& binding, const AbstractTrace& trace,
                                       std::optional<double> prior_override = std::nullopt);

// Pr(y = 1 | o_{1:n}) under the simplified, state-independent posterior.
double hmm_posterior(const Hmm& hmm, const SemanticBinding& binding, const AbstractTrace& trace,
                     std::optional<double> prior_override = std::nullopt);

// Pr(s_t | y = 1) along the Viterbi path for t = 1..n, divided by max_s Pr(s | y = 1).
std::vector<double> token_scores(const Hmm& hmm, const SemanticBinding& binding, const AbstractTrace& trace);

}  // namespace pollmgraph
