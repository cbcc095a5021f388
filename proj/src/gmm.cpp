#include <cmath>
#include <limits>
#include <numbers>

#include "pollmgraph/abstraction.hpp"
#include "pollmgraph/errors.hpp"
#include "pollmgraph/numeric.hpp"

namespace pollmgraph {

namespace {

constexpr double kCollapsedMass = 1e-12;

// Per-dimension population variance of all points, floored.
Vector pooled_variance(const Matrix& x) {
  const Vector mean = x.colwise().mean().transpose();
  Vector var = ((x.rowwise() - mean.transpose()).array().square().colwise().sum() /
                static_cast<double>(x.rows()))
                   .transpose();
  return var.cwiseMax(kCovarianceFloor);
}

// Weighted log-densities of every point under every component, n x N_s.
Matrix weighted_log_densities(const GmmAbstractor& g, const Matrix& x) {
  const Eigen::Index comps = g.weights.size();
  const Matrix inv_var = g.variances.cwiseInverse();
  Vector constant(comps);
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index j = 0; j < comps; ++j) {
    constant(j) = safe_log(g.weights(j)) -
                  0.5 * (static_cast<double>(x.cols()) * log_2pi + g.variances.row(j).array().log().sum());
  }
  // sum_d (x_d - mu_d)^2 / v_d expanded into three matrix products.
  const Matrix quad = x.array().square().matrix() * inv_var.transpose() -
                      2.0 * x * g.means.cwiseProduct(inv_var).transpose();
  const Vector mu_term = g.means.array().square().cwiseProduct(inv_var.array()).rowwise().sum();
  Matrix out = -0.5 * quad;
  out.rowwise() += (constant - 0.5 * mu_term).transpose();
  return out;
}

}  // namespace

Vector GmmAbstractor::weighted_log_density(const double* row) const {
  const Eigen::Index comps = weights.size();
  const Eigen::Index k = means.cols();
  Vector out(comps);
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index j = 0; j < comps; ++j) {
    double lp = safe_log(weights(j));
    const double* mu = means.row(j).data();
    const double* var = variances.row(j).data();
    for (Eigen::Index d = 0; d < k; ++d) {
      const double diff = row[d] - mu[d];
      lp -= 0.5 * (log_2pi + std::log(var[d]) + diff * diff / var[d]);
    }
    out(j) = lp;
  }
  return out;
}

Symbol GmmAbstractor::assign(const double* row) const {
  const Vector lp = weighted_log_density(row);
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < lp.size(); ++j) {
    if (lp(j) > lp(best)) best = j;
  }
  return static_cast<Symbol>(best);
}

GmmAbstractor fit_gmm(const Matrix& x, const GmmOptions& options) {
  const Eigen::Index n = x.rows();
  const auto comps = static_cast<Eigen::Index>(options.n_components);
  if (comps < 1) throw ValidationError("GMM needs at least one component");
  if (n < comps) {
    throw ValidationError("GMM with " + std::to_string(comps) + " components needs at least that many points, got " +
                          std::to_string(n));
  }
  if (!x.allFinite()) throw ValidationError("GMM input contains non-finite values");

  std::mt19937_64 rng(options.seed);
  GmmAbstractor g;
  const Vector global_var = pooled_variance(x);
  g.weights = Vector::Constant(comps, 1.0 / static_cast<double>(comps));
  g.means = kmeanspp_seeds(x, options.n_components, rng);
  g.variances = global_var.transpose().replicate(comps, 1);

  Matrix resp(n, comps);
  Vector point_ll(n);
  std::vector<bool> reseeded(static_cast<std::size_t>(comps), false);

  auto e_step = [&]() {
    const Matrix lp = weighted_log_densities(g, x);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = log_sum_exp(std::span<const double>(lp.row(i).data(), static_cast<std::size_t>(comps)));
      point_ll(i) = lse;
      resp.row(i) = (lp.row(i).array() - lse).exp();
      total += lse;
    }
    return total;
  };

  bool converged = false;
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    const double ll = e_step();
    if (!g.train_log.empty() && (ll - g.train_log.back()) / static_cast<double>(n) < options.tol) {
      g.train_log.push_back(ll);
      converged = true;
      break;
    }
    g.train_log.push_back(ll);

    const Vector mass = resp.colwise().sum().transpose();
    for (Eigen::Index j = 0; j < comps; ++j) {
      if (mass(j) < kCollapsedMass) {
        if (reseeded[static_cast<std::size_t>(j)]) {
          throw FitError("GMM component " + std::to_string(j) + " collapsed again after re-seeding");
        }
        reseeded[static_cast<std::size_t>(j)] = true;
        ++g.reseeds;
        // Restart the component at the worst-explained point.
        Eigen::Index worst = 0;
        point_ll.minCoeff(&worst);
        g.means.row(j) = x.row(worst);
        g.variances.row(j) = global_var.transpose();
        g.weights(j) = 1.0 / static_cast<double>(comps);
        continue;
      }
      g.weights(j) = mass(j) / static_cast<double>(n);
      const Eigen::RowVectorXd mu = (resp.col(j).transpose() * x) / mass(j);
      const Matrix centred = x.rowwise() - mu;
      const Eigen::RowVectorXd var = resp.col(j).transpose() * centred.array().square().matrix();
      g.means.row(j) = mu;
      g.variances.row(j) = (var / mass(j)).cwiseMax(kCovarianceFloor);
    }
    g.weights /= g.weights.sum();
  }
  if (!converged) g.train_log.push_back(e_step());
  g.fit_log_likelihood = g.train_log.back();
  return g;
}

}  // namespace pollmgraph
