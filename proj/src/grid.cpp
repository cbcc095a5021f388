#include <algorithm>
#include <cmath>
#include <limits>

#include "pollmgraph/abstraction.hpp"
#include "pollmgraph/errors.hpp"

namespace pollmgraph {

std::size_t grid_intervals_for(std::size_t n_states, std::size_t dims) {
  if (dims == 0) throw ValidationError("grid needs at least one dimension");
  std::size_t n = 1;
  auto cells = [dims](std::size_t base) {
    std::size_t total = 1;
    for (std::size_t d = 0; d < dims; ++d) total *= base;
    return total;
  };
  while (cells(n) < n_states) ++n;
  return n;
}

std::size_t GridAbstractor::n_states() const {
  std::size_t total = 1;
  for (std::size_t d = 0; d < dims_used(); ++d) total *= intervals;
  return total;
}

std::size_t GridAbstractor::interval(std::size_t dim, double x) const {
  const double lo = lower[dim];
  const double hi = upper[dim];
  if (!(hi > lo)) return 0;
  const double pos = std::floor((x - lo) * static_cast<double>(intervals) / (hi - lo));
  if (!(pos > 0.0)) return 0;  // also catches NaN
  return std::min(static_cast<std::size_t>(pos), intervals - 1);
}

Symbol GridAbstractor::assign(const double* row) const {
  std::size_t label = 0;
  for (std::size_t d = 0; d < dims_used(); ++d) label = label * intervals + interval(d, row[d]);
  return static_cast<Symbol>(label);
}

GridAbstractor fit_grid(const Matrix& projected, std::size_t intervals, std::size_t dims_used) {
  if (intervals < 1) throw ValidationError("grid needs at least one interval per dimension");
  if (dims_used < 1 || dims_used > static_cast<std::size_t>(projected.cols())) {
    throw ValidationError("grid dims_used = " + std::to_string(dims_used) + " outside [1, " +
                          std::to_string(projected.cols()) + "]");
  }
  if (projected.rows() < 1) throw ValidationError("grid needs at least one point");
  double cells = std::pow(static_cast<double>(intervals), static_cast<double>(dims_used));
  if (cells > static_cast<double>(std::numeric_limits<Symbol>::max())) {
    throw ValidationError("grid of " + std::to_string(intervals) + "^" + std::to_string(dims_used) +
                          " cells exceeds the symbol range");
  }

  GridAbstractor grid;
  grid.intervals = intervals;
  for (std::size_t d = 0; d < dims_used; ++d) {
    const auto col = projected.col(static_cast<Eigen::Index>(d));
    grid.lower.push_back(col.minCoeff());
    grid.upper.push_back(col.maxCoeff());
    if (!(grid.upper.back() > grid.lower.back())) grid.degenerate_dims.push_back(d);
  }
  return grid;
}

}  // namespace pollmgraph
