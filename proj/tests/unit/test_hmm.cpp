#include <doctest.h>

#include <random>

#include "../support/oracles.hpp"
#include "pollmgraph/errors.hpp"
#include "pollmgraph/hmm.hpp"
#include "pollmgraph/synthetic.hpp"

using namespace pollmgraph;

namespace {

AbstractTrace obs(std::vector<Symbol> s, std::optional<Label> y = std::nullopt) { return {"t", std::move(s), y}; }

Hmm identity_hmm() {
  Hmm h;
  h.pi = (Vector(2) << 0.6, 0.4).finished();
  h.transition = Matrix::Constant(2, 2, 0.5);
  h.emission = Matrix::Identity(2, 2);
  return h;
}

Hmm unigram(std::vector<double> b) {
  Hmm h;
  h.pi = Vector::Ones(1);
  h.transition = Matrix::Ones(1, 1);
  h.emission = Eigen::Map<Eigen::RowVectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  return h;
}

}  // namespace

TEST_CASE("single-state forward likelihood") {
  const Hmm h = unigram({1.0, 0.0});
  CHECK(forward_log_likelihood(h, obs({0, 0, 0})) == 0.0);
  CHECK(forward_log_likelihood(h, obs({0, 1})) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("forward likelihood matches enumeration over all 3^5 paths") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 20; ++rep) {
    const Hmm h = oracle::random_hmm(3, 3, rng);
    const auto o = oracle::random_symbols(4, 3, rng);
    const double expect = std::log(static_cast<double>(oracle::enumerate_likelihood(h, o)));
    CHECK(std::abs(forward_log_likelihood(h, obs(o)) - expect) < 1e-9);
  }
}

TEST_CASE("viterbi matches exhaustive argmax") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const Hmm h = oracle::random_hmm(3, 3, rng);
    const auto o = oracle::random_symbols(4, 3, rng);
    const auto best = oracle::enumerate_best_path(h, o);
    const DecodedPath p = viterbi(h, obs(o));
    CHECK(p.states == best.states);
    CHECK(std::abs(p.log_prob - std::log(static_cast<double>(best.prob))) < 1e-9);
  }
}

TEST_CASE("viterbi special structures") {
  const Hmm one = unigram({0.2, 0.5, 0.3});
  const DecodedPath p = viterbi(one, obs({2, 1, 1, 0}));
  CHECK(p.states == std::vector<std::size_t>(5, 0));
  CHECK(p.log_prob == doctest::Approx(forward_log_likelihood(one, obs({2, 1, 1, 0}))));

  Hmm id;
  id.pi = Vector::Constant(3, 1.0 / 3.0);
  id.transition = Matrix::Constant(3, 3, 1.0 / 3.0);
  id.emission = Matrix::Identity(3, 3);
  const std::vector<Symbol> o{2, 0, 0, 1, 2};
  const DecodedPath q = viterbi(id, obs(o));
  for (std::size_t t = 0; t < o.size(); ++t) CHECK(q.states[t + 1] == o[t]);
  CHECK(q.states[0] == 0);  // all s_0 tie; lowest index wins
}

TEST_CASE("single hidden state fit is the unigram frequency") {
  const std::vector<AbstractTrace> data{obs({0, 1, 1, 2}), obs({1, 1}), obs({2, 0, 1})};
  const Hmm h = fit_hmm(data, 3, HmmOptions{1, 0, 50, 1e-10, 1});
  CHECK(h.transition(0, 0) == 1.0);
  CHECK(h.pi(0) == 1.0);
  CHECK(h.emission(0, 0) == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
  CHECK(h.emission(0, 1) == doctest::Approx(5.0 / 9.0).epsilon(1e-12));
  CHECK(h.emission(0, 2) == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
  REQUIRE(h.train_log.size() >= 2);
  CHECK(h.train_log[1] == doctest::Approx(h.train_log.back()).epsilon(1e-12));
}

TEST_CASE("Baum-Welch is monotone and independent of the worker count") {
  std::mt19937_64 rng(5);
  const Hmm truth = oracle::random_hmm(3, 5, rng);
  const auto data = sample_hmm(truth, 80, 15, 6);
  const Hmm a = fit_hmm(data, 5, HmmOptions{4, 1, 40, 1e-12, 1});
  for (std::size_t i = 1; i < a.train_log.size(); ++i) CHECK(a.train_log[i] >= a.train_log[i - 1] - 1e-8);
  const Hmm b = fit_hmm(data, 5, HmmOptions{4, 1, 40, 1e-12, 4});
  CHECK(a.transition == b.transition);
  CHECK(a.emission == b.emission);
  CHECK(a.pi == b.pi);
  CHECK(a.train_log == b.train_log);
}

TEST_CASE("Baum-Welch recovers a well-separated two-state model") {
  Hmm truth;
  truth.pi = (Vector(2) << 0.5, 0.5).finished();
  truth.transition = (Matrix(2, 2) << 0.8, 0.2, 0.3, 0.7).finished();
  truth.emission = (Matrix(2, 3) << 0.9, 0.05, 0.05, 0.05, 0.05, 0.9).finished();
  const auto data = sample_hmm(truth, 500, 30, 1);
  const Hmm fit = fit_hmm(data, 3, HmmOptions{2, 1, 500, 1e-8, 4});
  CHECK(oracle::aligned_hmm_error(fit, truth) < 0.05);
}

TEST_CASE("semantic binding hand counts") {
  const Hmm h = identity_hmm();
  const std::vector<AbstractTrace> traces{obs({1, 1}, Label::hallucination), obs({0, 1}, Label::factual)};
  REQUIRE(viterbi(h, traces[0]).states == std::vector<std::size_t>{0, 1, 1});
  REQUIRE(viterbi(h, traces[1]).states == std::vector<std::size_t>{0, 0, 1});
  const SemanticBinding b = bind_semantics(h, traces, 0.0);
  CHECK(b.state_given_label[1](1) == doctest::Approx(2.0 / 3.0));
  CHECK(b.state_given_label[1](0) == doctest::Approx(1.0 / 3.0));
  CHECK(b.state_given_label[0](1) == doctest::Approx(1.0 / 3.0));
  CHECK(b.prior == 0.5);
}

TEST_CASE("semantic binding smoothing and symmetry") {
  const Hmm h = identity_hmm();
  const std::vector<AbstractTrace> traces{obs(std::vector<Symbol>(9, 0), Label::factual),
                                          obs({1, 0, 1}, Label::hallucination)};
  const SemanticBinding b = bind_semantics(h, traces, 1.0);
  CHECK(b.state_given_label[0](1) == doctest::Approx(1.0 / 12.0));

  const std::vector<AbstractTrace> twins{obs({0, 1}, Label::factual), obs({0, 1}, Label::hallucination)};
  const SemanticBinding s = bind_semantics(h, twins, 0.0);
  CHECK(s.state_given_label[0] == s.state_given_label[1]);
  CHECK(hmm_posterior(h, s, obs({1, 0, 0}), 0.5) == doctest::Approx(0.5));
}

TEST_CASE("simplified posterior on a one-step trace") {
  Hmm h = identity_hmm();
  SemanticBinding b;
  b.prior = 0.5;
  b.state_given_label[1] = (Vector(2) << 0.9, 0.1).finished();
  b.state_given_label[0] = (Vector(2) << 0.1, 0.9).finished();
  CHECK(hmm_posterior(h, b, obs({0})) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("posterior agrees with explicit per-step sums") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 40; ++rep) {
    const Hmm h = oracle::random_hmm(4, 3, rng);
    SemanticBinding b;
    b.prior = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    for (int y = 0; y < 2; ++y) b.state_given_label[y] = oracle::random_stochastic(1, 4, rng).row(0).transpose();
    const auto o = oracle::random_symbols(1 + static_cast<std::size_t>(rep % 12), 3, rng);
    long double joint[2];
    for (int y = 0; y < 2; ++y) {
      long double p = y == 1 ? b.prior : 1.0L - b.prior;
      for (Symbol s : o) {
        long double step = 0;
        for (Eigen::Index k = 0; k < 4; ++k) step += static_cast<long double>(b.state_given_label[y](k)) * h.emission(k, s);
        p *= step;
      }
      joint[y] = p;
    }
    const double expect = static_cast<double>(joint[1] / (joint[0] + joint[1]));
    CHECK(std::abs(hmm_posterior(h, b, obs(o)) - expect) < 1e-9);
  }
}

TEST_CASE("token scores follow the decoded path") {
  const Hmm h = identity_hmm();
  SemanticBinding b;
  b.state_given_label[1] = (Vector(2) << 0.2, 0.8).finished();
  b.state_given_label[0] = (Vector(2) << 0.7, 0.3).finished();
  const auto same = token_scores(h, b, obs({0, 0, 0}));
  CHECK(same == std::vector<double>(3, same[0]));
  const auto mixed = token_scores(h, b, obs({0, 1, 0}));
  CHECK(mixed[1] == 1.0);
  CHECK(mixed[0] == doctest::Approx(0.25));
  for (double v : mixed) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("known generator with forced path emits zeros") {
  Hmm h;
  h.pi = (Vector(2) << 1.0, 0.0).finished();
  h.transition = Matrix::Identity(2, 2);
  h.emission = Matrix::Identity(2, 2);
  for (const auto& t : sample_hmm(h, 20, 12, 3)) CHECK(t.states == std::vector<Symbol>(12, 0));
}

TEST_CASE("hmm input checks") {
  const Hmm h = identity_hmm();
  CHECK_THROWS_AS(forward_log_likelihood(h, obs({0, 2})), ValidationError);
  CHECK_THROWS_AS(fit_hmm({}, 2, HmmOptions{}), ValidationError);
}
