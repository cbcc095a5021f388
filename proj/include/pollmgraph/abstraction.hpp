#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "pollmgraph/pca.hpp"
#include "pollmgraph/trace.hpp"

namespace pollmgraph {

inline constexpr std::size_t kDefaultStates = 250;
inline constexpr std::size_t kDefaultGridDims = 2;
inline constexpr double kCovarianceFloor = 1e-6;

// Equal-width partition of the leading `dims_used` projected dimensions.
// Cell labels are row-major over dimensions: dimension 0 varies slowest.
struct GridAbstractor {
  std::size_t intervals = 1;  // N per dimension
  std::vector<double> lower;  // l_i, one per gridded dimension
  std::vector<double> upper;  // u_i
  std::vector<std::size_t> degenerate_dims;  // u_i == l_i; always interval 0

  std::size_t dims_used() const { return lower.size(); }
  std::size_t n_states() const;
  std::size_t interval(std::size_t dim, double x) const;
  Symbol assign(const double* row) const;
};

// Smallest N with N^dims >= n_states.
std::size_t grid_intervals_for(std::size_t n_states, std::size_t dims);

GridAbstractor fit_grid(const Matrix& projected, std::size_t intervals, std::size_t dims_used);

// Diagonal-covariance Gaussian mixture; each mode is one abstract state.
struct GmmAbstractor {
  Vector weights;    // N_s, sums to 1
  Matrix means;      // N_s x k
  Matrix variances;  // N_s x k, every entry >= kCovarianceFloor
  double fit_log_likelihood = 0.0;
  std::vector<double> train_log;  // total log-likelihood per EM iteration
  std::size_t reseeds = 0;

  std::size_t n_states() const { return static_cast<std::size_t>(weights.size()); }
  // log w_j + log N(x | mu_j, diag(var_j)) for every component.
  Vector weighted_log_density(const double* row) const;
  // Argmax of the responsibility; ties go to the lower index.
  Symbol assign(const double* row) const;
};

struct GmmOptions {
  std::size_t n_components = kDefaultStates;
  std::uint64_t seed = 0;
  double tol = 1e-4;  // on the per-sample mean log-likelihood gain
  std::size_t max_iter = 200;
};

GmmAbstractor fit_gmm(const Matrix& projected, const GmmOptions& options);

struct KmeansAbstractor {
  Matrix centroids;  // N_s x k
  std::vector<double> inertia_log;

  std::size_t n_states() const { return static_cast<std::size_t>(centroids.rows()); }
  Symbol assign(const double* row) const;
};

struct KmeansOptions {
  std::size_t n_clusters = kDefaultStates;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
};

KmeansAbstractor fit_kmeans(const Matrix& projected, const KmeansOptions& options);

// k-means++ seeding shared by the GMM and K-means backends.
Matrix kmeanspp_seeds(const Matrix& points, std::size_t count, std::mt19937_64& rng);

enum class AbstractionMethod { grid, gmm, kmeans };

std::string to_string(AbstractionMethod m);
AbstractionMethod abstraction_method_from_string(const std::string& s);

// Fitted PCA projector plus one clustering backend.
struct Abstractor {
  PcaProjector pca;
  std::variant<GridAbstractor, GmmAbstractor, KmeansAbstractor> backend;

  AbstractionMethod method() const;
  std::size_t n_states() const;
  std::vector<Symbol> symbols(const Matrix& embeddings) const;
};

AbstractTrace abstract_trace(const Abstractor& abstractor, const ConcreteTrace& trace);

}  // namespace pollmgraph
