#include "pollmgraph/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "pollmgraph/errors.hpp"

namespace pollmgraph {

double auc_roc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("auc_roc: " + std::to_string(scores.size()) + " scores but " + std::to_string(labels.size()) +
                          " labels");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw ValidationError("auc_roc: NaN score");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mid-ranks, so each tied positive/negative pair contributes one half.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == Label::hallucination) {
        positive_rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw ValidationError("auc_roc needs both positive and negative labels");
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

namespace {

std::pair<Dataset, Dataset> split_by_fraction(const Dataset& d, const FractionSplit& spec) {
  if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) throw ValidationError("split fraction must lie in (0, 1)");
  const std::size_t n = d.size();
  const auto n_train = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw ValidationError("fraction " + std::to_string(spec.fraction) + " of " + std::to_string(n) +
                          " traces leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  std::pair<Dataset, Dataset> out;
  out.first.metadata = out.second.metadata = d.metadata;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.first : out.second).traces.push_back(d.traces[i]);
  return out;
}

std::pair<Dataset, Dataset> split_by_category(const Dataset& d, const CategorySplit& spec) {
  const std::set<std::string> train(spec.train.begin(), spec.train.end());
  const std::set<std::string> test(spec.test.begin(), spec.test.end());
  for (const auto& c : train) {
    if (test.contains(c)) throw ValidationError("category " + c + " appears on both sides of the split");
  }
  std::set<std::string> present;
  for (const auto& t : d.traces) {
    if (t.category) present.insert(*t.category);
  }
  for (const auto* side : {&train, &test}) {
    for (const auto& c : *side) {
      if (!present.contains(c)) throw ValidationError("category " + c + " does not occur in the dataset");
    }
  }

  std::pair<Dataset, Dataset> out;
  out.first.metadata = out.second.metadata = d.metadata;
  for (const auto& t : d.traces) {
    if (!t.category) continue;
    if (train.contains(*t.category)) out.first.traces.push_back(t);
    else if (test.contains(*t.category)) out.second.traces.push_back(t);
  }
  if (out.first.empty() || out.second.empty()) throw ValidationError("category split leaves one side empty");
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, const SplitSpec& spec) {
  if (const auto* f = std::get_if<FractionSplit>(&spec)) return split_by_fraction(dataset, *f);
  return split_by_category(dataset, std::get<CategorySplit>(spec));
}

}  // namespace pollmgraph
