#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace pollmgraph {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum(exp(x))) with the max shifted out; all -inf yields -inf.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return kNegInf;
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (hi == kNegInf) return kNegInf;
  if (std::isinf(hi)) return hi;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

// Two-class softmax returning the y = 1 share. When both scores are -inf the
// evidence is void and the answer falls back to `fallback`.
inline double posterior_from_scores(double score0, double score1, double fallback) {
  if (score0 == kNegInf && score1 == kNegInf) return fallback;
  if (score1 == kNegInf) return 0.0;
  if (score0 == kNegInf) return 1.0;
  return 1.0 / (1.0 + std::exp(score0 - score1));
}

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

}  // namespace pollmgraph
