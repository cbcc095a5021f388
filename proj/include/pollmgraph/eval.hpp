#pragma once

#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pollmgraph/trace.hpp"

namespace pollmgraph {

// Mann-Whitney AUC: Pr(random positive outscores random negative), ties
// counting one half. Needs at least one label of each class.
double auc_roc(std::span<const double> scores, std::span<const Label> labels);

struct FractionSplit {
  double fraction = 0.5;  // share of traces placed in train, in (0, 1)
  std::uint64_t seed = 0;
};

struct CategorySplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

using SplitSpec = std::variant<FractionSplit, CategorySplit>;

// Train receives round(fraction * n) traces. Both sides keep input order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, const SplitSpec& spec);

}  // namespace pollmgraph
