#pragma once

#include <optional>

#include "pollmgraph/trace.hpp"

namespace pollmgraph {

inline constexpr std::size_t kDefaultPcaDim = 1024;
inline constexpr double kDefaultTheta = 0.05;

// Mean-centred linear projector onto the leading k principal directions.
struct PcaProjector {
  Vector mean;        // length m
  Matrix components;  // k x m, orthonormal rows, descending variance
  Vector variances;   // length k, eigenvalues of the sample covariance
  double explained_loss = 0.0;  // information loss at k on the fitting data

  Eigen::Index k() const { return components.rows(); }
  Eigen::Index input_dim() const { return mean.size(); }

  Matrix project(const Matrix& data) const;
  // Projects, then maps back into input space using the first `k` components.
  Matrix reconstruct(const Matrix& data, Eigen::Index k) const;
};

struct InfoLoss {
  double value = 0.0;
  std::size_t zero_norm_rows = 0;  // excluded from the average
};

// Mean over rows of |v - v_hat|^2 / |v|^2, with v_hat rebuilt from the top-k
// components. Requires 1 <= k <= projector.k().
InfoLoss info_loss(const Matrix& data, const PcaProjector& projector, Eigen::Index k);

// Fits on `data` (n x m, n >= 2). With `k_override` the retained dimension is
// fixed; otherwise k = argmin_k |loss(k) - theta| over k = 1..m, ties (within
// 1e-12) going to the smaller k.
PcaProjector fit_pca(const Matrix& data, double theta, std::optional<Eigen::Index> k_override);

// Loss for every k in 1..m from a full basis fit; entry k-1 holds loss(k).
std::vector<double> info_loss_curve(const Matrix& data);

}  // namespace pollmgraph
