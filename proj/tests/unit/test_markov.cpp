#include <doctest.h>

#include <random>

#include "../support/oracles.hpp"
#include "pollmgraph/errors.hpp"
#include "pollmgraph/markov.hpp"

using namespace pollmgraph;

namespace {
constexpr Symbol A = 0;
constexpr Symbol B = 1;

std::vector<AbstractTrace> hand_count_corpus() {
  return {{"t1", {A, B, A}, Label::hallucination}, {"t2", {A, A}, Label::hallucination}, {"t3", {B, B}, Label::factual}};
}
}  // namespace

TEST_CASE("hand-counted Markov fit") {
  const auto mm = fit_mm(hand_count_corpus(), 2, 0.0);
  CHECK(mm.prior == 2.0 / 3.0);
  CHECK(mm.initial[1](A) == 1.0);
  CHECK(mm.initial[1](B) == 0.0);
  CHECK(mm.transitions[1](A, B) == 0.5);
  CHECK(mm.transitions[1](A, A) == 0.5);
  CHECK(mm.transitions[1](B, A) == 1.0);
  CHECK(mm.transitions[0](B, B) == 1.0);
  CHECK(mm_log_likelihood(mm, {"q", {A, B, A}, std::nullopt}, Label::hallucination) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("unobserved transition rows become uniform") {
  const std::vector<AbstractTrace> traces{{"a", {A}, Label::hallucination}, {"b", {A}, Label::factual}};
  const auto mm = fit_mm(traces, 2, 0.0);
  for (int y = 0; y < 2; ++y) {
    CHECK(mm.initial[y](A) == 1.0);
    CHECK(mm.transitions[y](A, A) == 0.5);
    CHECK(mm.transitions[y](B, B) == 0.5);
  }
}

TEST_CASE("additive smoothing keeps unseen transitions positive") {
  const std::vector<AbstractTrace> traces{{"a", {A, A, A, B}, Label::hallucination}, {"b", {A, A, A}, Label::factual}};
  const auto mm = fit_mm(traces, 2, 1.0);
  CHECK(mm.transitions[0](A, B) == doctest::Approx(1.0 / (2.0 + 2.0)));
  CHECK(mm.transitions[0](A, B) > 0.0);
  for (int y = 0; y < 2; ++y) CHECK(mm.transitions[y].rowwise().sum().isApproxToConstant(1.0, 1e-12));
}

TEST_CASE("Markov likelihood edge cases") {
  const auto mm = fit_mm(hand_count_corpus(), 2, 0.0);
  CHECK(mm_log_likelihood(mm, {"q", {A}, std::nullopt}, Label::hallucination) == 0.0);
  CHECK(mm_log_likelihood(mm, {"q", {A, A, A}, std::nullopt}, Label::factual) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(mm_log_likelihood(mm, {"q", {A, 5}, std::nullopt}, Label::factual), ValidationError);

  LabeledMarkovModel det;
  det.n_states = 2;
  for (int y = 0; y < 2; ++y) {
    det.initial[y] = Vector::Zero(2);
    det.initial[y](A) = 1.0;
    det.transitions[y] = Matrix::Zero(2, 2);
    det.transitions[y].col(A).setOnes();
  }
  CHECK(mm_log_likelihood(det, {"q", {A, A, A}, std::nullopt}, Label::factual) == 0.0);
}

TEST_CASE("posterior symmetry and two-term Bayes") {
  auto mm = fit_mm(hand_count_corpus(), 2, 0.0);
  mm.initial[0] = mm.initial[1];
  mm.transitions[0] = mm.transitions[1];
  CHECK(mm_posterior(mm, {"q", {A, B, A}, std::nullopt}, 0.5) == doctest::Approx(0.5));

  LabeledMarkovModel m;
  m.n_states = 2;
  m.prior = 0.5;
  m.initial[1] = (Vector(2) << 1.0, 0.0).finished();
  m.transitions[1] = (Matrix(2, 2) << 1.0, 0.0, 0.0, 1.0).finished();
  m.initial[0] = (Vector(2) << 0.6, 0.4).finished();
  m.transitions[0] = (Matrix(2, 2) << 0.5, 0.5, 0.5, 0.5).finished();
  const double p = 0.6 * 0.5 * 0.5;
  CHECK(mm_posterior(m, {"q", {A, A, A}, std::nullopt}) == doctest::Approx(1.0 / (1.0 + p)).epsilon(1e-12));
}

TEST_CASE("posterior agrees with extended-precision linear Bayes") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    LabeledMarkovModel m;
    m.n_states = 3;
    m.prior = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    for (int y = 0; y < 2; ++y) {
      m.initial[y] = oracle::random_stochastic(1, 3, rng).row(0).transpose();
      m.transitions[y] = oracle::random_stochastic(3, 3, rng);
    }
    const auto obs = oracle::random_symbols(5, 3, rng);
    long double joint[2];
    for (int y = 0; y < 2; ++y) {
      long double p = m.initial[y](obs[0]);
      for (std::size_t t = 1; t < obs.size(); ++t) p *= m.transitions[y](obs[t - 1], obs[t]);
      joint[y] = p * (y == 1 ? m.prior : 1.0L - m.prior);
    }
    const double expect = static_cast<double>(joint[1] / (joint[0] + joint[1]));
    CHECK(std::abs(mm_posterior(m, {"q", obs, std::nullopt}) - expect) < 1e-9);
  }
}

TEST_CASE("Markov fit rejects bad input") {
  auto traces = hand_count_corpus();
  CHECK_THROWS_AS(fit_mm(traces, 2, -1.0), ValidationError);
  traces[2].label = Label::hallucination;
  CHECK_THROWS_WITH_AS(fit_mm(traces, 2, 0.0), doctest::Contains("empty class 0"), ValidationError);
}
