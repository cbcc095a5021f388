#include "pollmgraph/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

#include "pollmgraph/errors.hpp"
#include "pollmgraph/numeric.hpp"

namespace pollmgraph {

namespace {

// Traces per E-step work unit. Fixed so the reduction order never depends on
// the worker count.
constexpr std::size_t kChunk = 32;

void check_trace(const AbstractTrace& trace, std::size_t n_obs) {
  if (trace.states.empty()) throw ValidationError("empty trace " + trace.id);
  for (Symbol s : trace.states) {
    if (s >= n_obs) {
      throw ValidationError("symbol " + std::to_string(s) + " in trace " + trace.id + " >= alphabet size " +
                            std::to_string(n_obs));
    }
  }
}

Matrix log_of(const Matrix& m) { return m.unaryExpr([](double p) { return safe_log(p); }); }
Vector log_of(const Vector& v) { return v.unaryExpr([](double p) { return safe_log(p); }); }

// log(M^T exp(v)) or log(M exp(v)) with the max of v shifted out.
Vector log_matvec(const Matrix& m, const Vector& log_v, bool transpose) {
  const double hi = log_v.maxCoeff();
  if (hi == kNegInf) return Vector::Constant(m.rows(), kNegInf);
  const Vector scaled = (log_v.array() - hi).exp().matrix();
  const Vector prod = transpose ? Vector(m.transpose() * scaled) : Vector(m * scaled);
  return prod.unaryExpr([hi](double p) { return p > 0.0 ? hi + std::log(p) : kNegInf; });
}

// Forward lattice: row t holds log alpha_t, t = 0..n.
Matrix forward_lattice(const Hmm& hmm, const Matrix& log_emission, const AbstractTrace& trace) {
  const auto n = static_cast<Eigen::Index>(trace.states.size());
  Matrix alpha(n + 1, hmm.pi.size());
  alpha.row(0) = log_of(hmm.pi).transpose();
  for (Eigen::Index t = 1; t <= n; ++t) {
    const Vector prev = alpha.row(t - 1).transpose();
    alpha.row(t) = (log_matvec(hmm.transition, prev, true) + log_emission.col(trace.states[static_cast<std::size_t>(t - 1)]))
                       .transpose();
  }
  return alpha;
}

double lse_row(const Matrix& m, Eigen::Index row) {
  const Vector v = m.row(row).transpose();
  return log_sum_exp(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

struct Accumulator {
  Vector pi;
  Matrix transition;
  Matrix emission;
  double log_likelihood = 0.0;

  Accumulator(Eigen::Index h, Eigen::Index s)
      : pi(Vector::Zero(h)), transition(Matrix::Zero(h, h)), emission(Matrix::Zero(h, s)) {}

  void add(const Accumulator& o) {
    pi += o.pi;
    transition += o.transition;
    emission += o.emission;
    log_likelihood += o.log_likelihood;
  }
};

void accumulate_trace(const Hmm& hmm, const Matrix& log_emission, const AbstractTrace& trace, Accumulator& acc) {
  const auto n = static_cast<Eigen::Index>(trace.states.size());
  const Eigen::Index h = hmm.pi.size();
  const Matrix alpha = forward_lattice(hmm, log_emission, trace);
  const double ll = lse_row(alpha, n);
  if (ll == kNegInf) throw FitError("trace " + trace.id + " has zero likelihood under the current HMM");

  // emit(t) = log B(., o_t) + log beta_t, which both the backward pass and xi need.
  Matrix beta(n + 1, h);
  beta.row(n).setZero();
  Matrix emit(n + 1, h);
  for (Eigen::Index t = n; t >= 1; --t) {
    emit.row(t) = log_emission.col(trace.states[static_cast<std::size_t>(t - 1)]).transpose() + beta.row(t);
    beta.row(t - 1) = log_matvec(hmm.transition, emit.row(t).transpose(), false).transpose();
  }

  auto gamma = [&](Eigen::Index t) -> Vector { return ((alpha.row(t) + beta.row(t)).array() - ll).exp().transpose(); };
  acc.pi += gamma(0);
  // xi_t(i, j) = left_t(i) A(i, j) right_t(j); the A factor is applied once
  // per E-step, so here only the sum of outer products is needed.
  Matrix left = Matrix::Zero(n, h);
  Matrix right = Matrix::Zero(n, h);
  for (Eigen::Index t = 1; t <= n; ++t) {
    acc.emission.col(trace.states[static_cast<std::size_t>(t - 1)]) += gamma(t);
    const double ma = alpha.row(t - 1).maxCoeff();
    const double mb = emit.row(t).maxCoeff();
    if (ma == kNegInf || mb == kNegInf) continue;
    left.row(t - 1) = (alpha.row(t - 1).array() - ma).exp() * std::exp(ma + mb - ll);
    right.row(t - 1) = (emit.row(t).array() - mb).exp();
  }
  acc.transition.noalias() += left.transpose() * right;
  acc.log_likelihood += ll;
}

// Max-shifted exponentials of weak states underflow into subnormals, which
// slow the E-step by more than an order of magnitude on x86. Anything that
// small is far below the shifted maximum, so flushing it to zero is harmless.
class FlushSubnormals {
 public:
#if defined(__SSE2__)
  FlushSubnormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | kFlushToZero | kDenormalsAreZero); }
  ~FlushSubnormals() { _mm_setcsr(saved_); }

 private:
  static constexpr unsigned kFlushToZero = 0x8000;
  static constexpr unsigned kDenormalsAreZero = 0x0040;
  unsigned saved_;
#endif
};

Accumulator e_step(const Hmm& hmm, const std::vector<AbstractTrace>& traces, std::size_t threads) {
  const Eigen::Index h = hmm.pi.size();
  const Eigen::Index s = hmm.emission.cols();
  const Matrix log_emission = log_of(hmm.emission);
  const std::size_t chunks = (traces.size() + kChunk - 1) / kChunk;
  std::vector<Accumulator> partial(chunks, Accumulator(h, s));

  auto run_chunk = [&](std::size_t c) {
    const FlushSubnormals guard;
    const std::size_t end = std::min(traces.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) accumulate_trace(hmm, log_emission, traces[i], partial[c]);
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(chunks, 1));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  Accumulator total(h, s);
  for (const auto& p : partial) total.add(p);
  total.transition.array() *= hmm.transition.array();
  return total;
}

// Normalises each row of `counts`; rows with no mass keep `fallback`'s row.
Matrix normalise_rows(const Matrix& counts, const Matrix& fallback) {
  Matrix out = counts;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double total = out.row(r).sum();
    if (total > 0.0) {
      out.row(r) /= total;
    } else {
      out.row(r) = fallback.row(r);
    }
  }
  return out;
}

Vector dirichlet_row(Eigen::Index size, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = gamma(rng);
  return v / v.sum();
}

// Per-class log mixture emission: log sum_s Pr(s|y) Pr(o|s) for every o.
std::array<Vector, 2> class_emission_logs(const Hmm& hmm, const SemanticBinding& binding) {
  std::array<Vector, 2> out;
  const Matrix log_emission = log_of(hmm.emission);
  for (int y = 0; y < 2; ++y) {
    const Vector log_state = log_of(binding.state_given_label[y]);
    out[y].resize(hmm.emission.cols());
    for (Eigen::Index o = 0; o < hmm.emission.cols(); ++o) {
      const Vector terms = log_state + log_emission.col(o);
      out[y](o) = log_sum_exp(std::span<const double>(terms.data(), static_cast<std::size_t>(terms.size())));
    }
  }
  return out;
}

// Candidates this close count as tied, so the lowest index wins instead of
// whichever rounding error came out ahead.
bool clearly_greater(double cand, double best) {
  if (best == kNegInf) return cand > best;
  return cand > best + 1e-12 * std::max(1.0, std::abs(best));
}

DecodedPath viterbi_with(const Hmm& hmm, const Matrix& log_transition, const Matrix& log_emission,
                         const AbstractTrace& trace) {
  const std::size_t n = trace.states.size();
  const Eigen::Index h = hmm.pi.size();
  Vector delta = log_of(hmm.pi);
  std::vector<std::vector<Eigen::Index>> back(n + 1, std::vector<Eigen::Index>(static_cast<std::size_t>(h), 0));
  Vector next(h);
  for (std::size_t t = 1; t <= n; ++t) {
    const Symbol o = trace.states[t - 1];
    for (Eigen::Index j = 0; j < h; ++j) {
      Eigen::Index arg = 0;
      double best = delta(0) + log_transition(0, j);
      for (Eigen::Index i = 1; i < h; ++i) {
        const double cand = delta(i) + log_transition(i, j);
        if (clearly_greater(cand, best)) {
          best = cand;
          arg = i;
        }
      }
      back[t][static_cast<std::size_t>(j)] = arg;
      next(j) = best + log_emission(j, o);
    }
    delta.swap(next);
  }

  DecodedPath path;
  path.states.resize(n + 1);
  Eigen::Index last = 0;
  for (Eigen::Index j = 1; j < h; ++j) {
    if (clearly_greater(delta(j), delta(last))) last = j;
  }
  path.log_prob = delta(last);
  path.states[n] = static_cast<std::size_t>(last);
  for (std::size_t t = n; t >= 1; --t) {
    path.states[t - 1] = static_cast<std::size_t>(back[t][path.states[t]]);
  }
  return path;
}

}  // namespace

Hmm fit_hmm(const std::vector<AbstractTrace>& traces, std::size_t n_obs, const HmmOptions& options) {
  if (options.n_hidden < 1) throw ValidationError("HMM needs at least one hidden state");
  if (n_obs < 1) throw ValidationError("HMM needs at least one observation symbol");
  if (traces.empty()) throw ValidationError("HMM fitting needs at least one trace");
  for (const auto& t : traces) check_trace(t, n_obs);

  const auto h = static_cast<Eigen::Index>(options.n_hidden);
  const auto s = static_cast<Eigen::Index>(n_obs);
  std::mt19937_64 rng(options.seed);
  auto random_start = [&] {
    Hmm start;
    start.pi = dirichlet_row(h, rng);
    start.transition.resize(h, h);
    start.emission.resize(h, s);
    for (Eigen::Index r = 0; r < h; ++r) start.transition.row(r) = dirichlet_row(h, rng).transpose();
    for (Eigen::Index r = 0; r < h; ++r) start.emission.row(r) = dirichlet_row(s, rng).transpose();
    return start;
  };

  // Runs EM until max_iter total entries in train_log or a gain below tol.
  auto run = [&](Hmm& hmm, std::size_t max_iter) {
    while (hmm.train_log.size() < max_iter) {
      const Accumulator acc = e_step(hmm, traces, options.threads);
      const bool stop = !hmm.train_log.empty() && acc.log_likelihood - hmm.train_log.back() < options.tol;
      hmm.train_log.push_back(acc.log_likelihood);
      if (stop) return true;
      hmm.pi = acc.pi / acc.pi.sum();
      hmm.transition = normalise_rows(acc.transition, hmm.transition);
      hmm.emission = normalise_rows(acc.emission, hmm.emission);
    }
    return false;
  };

  // Short runs from several starts; the best one by likelihood carries on.
  // Single starts fall into label-parity optima a fair share of the time.
  const std::size_t starts = h == 1 ? 1 : std::max<std::size_t>(options.n_starts, 1);
  const std::size_t probe = std::min(options.start_iter, options.max_iter);
  Hmm best;
  bool best_converged = false;
  for (std::size_t i = 0; i < starts; ++i) {
    Hmm candidate = random_start();
    const bool converged = run(candidate, starts == 1 ? options.max_iter : probe);
    if (i == 0 || (!candidate.train_log.empty() && candidate.train_log.back() > best.train_log.back())) {
      best = std::move(candidate);
      best_converged = converged;
    }
  }
  if (best.train_log.empty() && options.max_iter == 0) {
    best.train_log.push_back(e_step(best, traces, options.threads).log_likelihood);
    return best;
  }
  if (!best_converged && !run(best, options.max_iter)) {
    best.train_log.push_back(e_step(best, traces, options.threads).log_likelihood);
  }
  return best;
}

double forward_log_likelihood(const Hmm& hmm, const AbstractTrace& trace) {
  check_trace(trace, hmm.n_obs());
  const Matrix alpha = forward_lattice(hmm, log_of(hmm.emission), trace);
  return lse_row(alpha, alpha.rows() - 1);
}

DecodedPath viterbi(const Hmm& hmm, const AbstractTrace& trace) {
  check_trace(trace, hmm.n_obs());
  return viterbi_with(hmm, log_of(hmm.transition), log_of(hmm.emission), trace);
}

SemanticBinding bind_semantics(const Hmm& hmm, const std::vector<AbstractTrace>& traces, double epsilon) {
  if (!(epsilon >= 0.0)) throw ValidationError("smoothing must be >= 0");
  const auto counts = require_labels(traces);
  const auto h = static_cast<Eigen::Index>(hmm.n_hidden());
  const Matrix log_transition = log_of(hmm.transition);
  const Matrix log_emission = log_of(hmm.emission);

  std::array<Vector, 2> occurrences{Vector::Zero(h), Vector::Zero(h)};
  for (const auto& t : traces) {
    check_trace(t, hmm.n_obs());
    const DecodedPath path = viterbi_with(hmm, log_transition, log_emission, t);
    for (std::size_t s : path.states) occurrences[to_int(*t.label)](static_cast<Eigen::Index>(s)) += 1.0;
  }

  SemanticBinding binding;
  binding.smoothing = epsilon;
  binding.prior = static_cast<double>(counts[1]) / static_cast<double>(counts[0] + counts[1]);
  for (int y = 0; y < 2; ++y) {
    const double total = occurrences[y].sum() + epsilon * static_cast<double>(h);
    binding.state_given_label[y] = (occurrences[y].array() + epsilon) / total;
  }
  return binding;
}

std::array<double, 2> hmm_class_scores(const Hmm& hmm, const SemanticBinding& binding, const AbstractTrace& trace,
                                       std::optional<double> prior_override) {
  check_trace(trace, hmm.n_obs());
  const double prior = prior_override.value_or(binding.prior);
  const auto mix = class_emission_logs(hmm, binding);
  std::array<double, 2> scores{safe_log(1.0 - prior), safe_log(prior)};
  for (int y = 0; y < 2; ++y) {
    for (Symbol o : trace.states) scores[y] += mix[y](o);
  }
  return scores;
}

double hmm_posterior(const Hmm& hmm, const SemanticBinding& binding, const AbstractTrace& trace,
                     std::optional<double> prior_override) {
  const auto scores = hmm_class_scores(hmm, binding, trace, prior_override);
  return posterior_from_scores(scores[0], scores[1], prior_override.value_or(binding.prior));
}

std::vector<double> token_scores(const Hmm& hmm, const SemanticBinding& binding, const AbstractTrace& trace) {
  const DecodedPath path = viterbi(hmm, trace);
  const Vector& p1 = binding.state_given_label[1];
  const double top = p1.maxCoeff();
  std::vector<double> scores;
  scores.reserve(trace.size());
  for (std::size_t t = 1; t < path.states.size(); ++t) {
    const double raw = p1(static_cast<Eigen::Index>(path.states[t]));
    scores.push_back(top > 0.0 ? std::clamp(raw / top, 0.0, 1.0) : 0.0);
  }
  return scores;
}

}  // namespace pollmgraph
