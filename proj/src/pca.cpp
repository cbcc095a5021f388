#include "pollmgraph/pca.hpp"

#include <cmath>
#include <numeric>

#include "pollmgraph/errors.hpp"

namespace pollmgraph {

namespace {

constexpr double kTieTolerance = 1e-12;

struct Basis {
  Vector mean;
  Matrix components;  // rows are principal directions, all m of them or the rank
  Vector variances;
};

// Flip each row so that its largest-magnitude entry is positive.
void fix_signs(Matrix& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    Eigen::Index arg = 0;
    rows.row(r).cwiseAbs().maxCoeff(&arg);
    if (rows(r, arg) < 0) rows.row(r) *= -1.0;
  }
}

void check_input(const Matrix& data) {
  if (data.rows() < 2) throw ValidationError("PCA needs at least 2 rows, got " + std::to_string(data.rows()));
  if (data.cols() < 1) throw ValidationError("PCA needs at least one column");
  if (!data.allFinite()) throw ValidationError("PCA input contains non-finite values");
}

// Returns up to `want` leading directions. Uses the m x m covariance when n >= m
// and the n x n Gram matrix otherwise; directions beyond the data rank are an
// orthonormal completion and carry zero variance.
Basis principal_basis(const Matrix& data, Eigen::Index want) {
  const Eigen::Index n = data.rows();
  const Eigen::Index m = data.cols();
  Basis basis;
  basis.mean = data.colwise().mean().transpose();
  const Matrix centred = data.rowwise() - basis.mean.transpose();

  Matrix directions;  // m x r, columns
  Vector eigenvalues;
  if (n >= m) {
    const Matrix cov = (centred.transpose() * centred) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success) throw FitError("covariance eigendecomposition failed");
    directions = solver.eigenvectors().rowwise().reverse();
    eigenvalues = solver.eigenvalues().reverse();
  } else {
    const Matrix gram = (centred * centred.transpose()) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
    if (solver.info() != Eigen::Success) throw FitError("Gram eigendecomposition failed");
    const Vector lambda = solver.eigenvalues().reverse();
    const Matrix u = solver.eigenvectors().rowwise().reverse();
    const double cutoff = std::max(lambda(0), 0.0) * 1e-12;
    Eigen::Index rank = 0;
    while (rank < n && lambda(rank) > cutoff && lambda(rank) > 0.0) ++rank;
    directions.resize(m, rank);
    for (Eigen::Index r = 0; r < rank; ++r) {
      Vector d = centred.transpose() * u.col(r);
      directions.col(r) = d / d.norm();
    }
    eigenvalues = lambda.head(rank);
  }

  Eigen::Index have = directions.cols();
  if (have < want) {
    // Complete with the trailing columns of a Householder Q seeded by the known directions.
    Matrix completion(m, want);
    completion.leftCols(have) = directions;
    if (have == 0) {
      completion = Matrix::Identity(m, want);
    } else {
      Eigen::HouseholderQR<Matrix> qr(directions);
      const Matrix q = qr.householderQ() * Matrix::Identity(m, want);
      completion.rightCols(want - have) = q.rightCols(want - have);
    }
    directions = completion;
    Vector padded = Vector::Zero(want);
    padded.head(have) = eigenvalues;
    eigenvalues = padded;
    have = want;
  }

  basis.components = directions.leftCols(want).transpose();
  basis.variances = eigenvalues.head(want).cwiseMax(0.0);
  fix_signs(basis.components);
  return basis;
}

// Suffix sums of squared coordinates give the residual for every k at once.
std::vector<double> loss_curve(const Matrix& data, const Basis& basis) {
  const Eigen::Index m = data.cols();
  const Eigen::Index r = basis.components.rows();
  const Matrix coords = (data.rowwise() - basis.mean.transpose()) * basis.components.transpose();
  std::vector<double> curve(static_cast<std::size_t>(m), 0.0);
  std::size_t used = 0;
  std::vector<double> residual(static_cast<std::size_t>(r) + 1);
  for (Eigen::Index row = 0; row < data.rows(); ++row) {
    const double norm2 = data.row(row).squaredNorm();
    if (norm2 == 0.0) continue;
    ++used;
    residual[static_cast<std::size_t>(r)] = 0.0;
    for (Eigen::Index i = r - 1; i >= 0; --i) {
      residual[static_cast<std::size_t>(i)] = residual[static_cast<std::size_t>(i) + 1] + coords(row, i) * coords(row, i);
    }
    for (Eigen::Index k = 1; k <= m; ++k) {
      const double res = k < r ? residual[static_cast<std::size_t>(k)] : 0.0;
      curve[static_cast<std::size_t>(k - 1)] += res / norm2;
    }
  }
  if (used == 0) throw ValidationError("every row has zero norm; information loss undefined");
  for (double& c : curve) c /= static_cast<double>(used);
  return curve;
}

}  // namespace

Matrix PcaProjector::project(const Matrix& data) const {
  if (data.cols() != input_dim()) {
    throw ValidationError("width mismatch: projector expects " + std::to_string(input_dim()) +
                          " columns, got " + std::to_string(data.cols()));
  }
  return (data.rowwise() - mean.transpose()) * components.transpose();
}

Matrix PcaProjector::reconstruct(const Matrix& data, Eigen::Index k) const {
  const Matrix coords = project(data).leftCols(k);
  return (coords * components.topRows(k)).rowwise() + mean.transpose();
}

InfoLoss info_loss(const Matrix& data, const PcaProjector& projector, Eigen::Index k) {
  if (k < 1 || k > projector.k()) {
    throw ValidationError("k = " + std::to_string(k) + " outside [1, " + std::to_string(projector.k()) + "]");
  }
  const Matrix rebuilt = projector.reconstruct(data, k);
  InfoLoss out;
  double total = 0.0;
  std::size_t used = 0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const double norm2 = data.row(r).squaredNorm();
    if (norm2 == 0.0) {
      ++out.zero_norm_rows;
      continue;
    }
    total += (data.row(r) - rebuilt.row(r)).squaredNorm() / norm2;
    ++used;
  }
  if (used == 0) throw ValidationError("every row has zero norm; information loss undefined");
  out.value = total / static_cast<double>(used);
  return out;
}

std::vector<double> info_loss_curve(const Matrix& data) {
  check_input(data);
  const Eigen::Index rank_cap = std::min(data.cols(), data.rows());
  return loss_curve(data, principal_basis(data, rank_cap));
}

PcaProjector fit_pca(const Matrix& data, double theta, std::optional<Eigen::Index> k_override) {
  check_input(data);
  const Eigen::Index m = data.cols();
  if (!(theta >= 0.0)) throw ValidationError("theta must be >= 0");
  if (k_override && (*k_override < 1 || *k_override > m)) {
    throw ValidationError("k_override = " + std::to_string(*k_override) + " outside [1, " + std::to_string(m) + "]");
  }

  Eigen::Index k = 0;
  Basis basis;
  std::vector<double> curve;
  if (k_override) {
    k = *k_override;
    basis = principal_basis(data, k);
  } else {
    basis = principal_basis(data, std::min(m, data.rows()));
    curve = loss_curve(data, basis);
    k = 1;
    double best = std::abs(curve[0] - theta);
    for (Eigen::Index cand = 2; cand <= m; ++cand) {
      const double gap = std::abs(curve[static_cast<std::size_t>(cand - 1)] - theta);
      if (gap < best - kTieTolerance) {
        best = gap;
        k = cand;
      }
    }
    if (k > basis.components.rows()) basis = principal_basis(data, k);
  }

  PcaProjector p;
  p.mean = basis.mean;
  p.components = basis.components.topRows(k);
  p.variances = basis.variances.head(k);
  p.explained_loss = curve.empty() ? info_loss(data, p, k).value : curve[static_cast<std::size_t>(k - 1)];
  return p;
}

}  // namespace pollmgraph
