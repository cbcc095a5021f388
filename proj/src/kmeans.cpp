#include <limits>

#include "pollmgraph/abstraction.hpp"
#include "pollmgraph/errors.hpp"

namespace pollmgraph {

namespace {

double squared_distance(const double* a, const double* b, Eigen::Index k) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

}  // namespace

Matrix kmeanspp_seeds(const Matrix& points, std::size_t count, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  const Eigen::Index k = points.cols();
  Matrix seeds(static_cast<Eigen::Index>(count), k);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  seeds.row(0) = points.row(static_cast<Eigen::Index>(pick(rng)));

  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < count; ++c) {
    const double* last = seeds.row(static_cast<Eigen::Index>(c - 1)).data();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(static_cast<Eigen::Index>(i)).data(), last, k));
      total += nearest[i];
    }
    std::size_t chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += nearest[i];
        if (acc > target && nearest[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);  // all points coincide with existing seeds
    }
    seeds.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(chosen));
  }
  return seeds;
}

Symbol KmeansAbstractor::assign(const double* row) const {
  Symbol best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
    const double d = squared_distance(row, centroids.row(j).data(), centroids.cols());
    if (d < best_d) {
      best_d = d;
      best = static_cast<Symbol>(j);
    }
  }
  return best;
}

KmeansAbstractor fit_kmeans(const Matrix& projected, const KmeansOptions& options) {
  const auto n = static_cast<std::size_t>(projected.rows());
  const std::size_t clusters = options.n_clusters;
  const Eigen::Index k = projected.cols();
  if (clusters < 1) throw ValidationError("K-means needs at least one cluster");
  if (n < clusters) {
    throw ValidationError("K-means with " + std::to_string(clusters) + " clusters needs at least that many points, got " +
                          std::to_string(n));
  }
  if (!projected.allFinite()) throw ValidationError("K-means input contains non-finite values");

  std::mt19937_64 rng(options.seed);
  KmeansAbstractor model;
  model.centroids = kmeanspp_seeds(projected, clusters, rng);

  std::vector<Symbol> assignment(n, 0);
  std::vector<double> dist(n, 0.0);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(options.max_iter, 1); ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = projected.row(static_cast<Eigen::Index>(i)).data();
      const Symbol a = model.assign(row);
      if (a != assignment[i]) changed = true;
      assignment[i] = a;
      dist[i] = squared_distance(row, model.centroids.row(a).data(), k);
      inertia += dist[i];
    }
    model.inertia_log.push_back(inertia);
    if (iter > 0 && !changed) break;

    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(clusters), k);
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(assignment[i]) += projected.row(static_cast<Eigen::Index>(i));
      ++counts[assignment[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t j = 0; j < clusters; ++j) {
      const auto row = static_cast<Eigen::Index>(j);
      if (counts[j] > 0) {
        model.centroids.row(row) = sums.row(row) / static_cast<double>(counts[j]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      taken[far] = true;
      model.centroids.row(row) = projected.row(static_cast<Eigen::Index>(far));
    }
  }
  return model;
}

}  // namespace pollmgraph
