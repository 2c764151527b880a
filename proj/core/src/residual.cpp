#include "egur/residual.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "egur/error.hpp"

namespace egur::residual {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void fix_sign(std::span<double> v) {
  std::size_t arg = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
  }
  if (v[arg] < 0.0) {
    for (double& x : v) x = -x;
  }
}

}  // namespace

IdSubspace fit_subspace(const Matrix& features, SubspaceOptions opts) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n < 2) throw std::invalid_argument("subspace fit needs at least two samples");
  if (d < 2) throw std::invalid_argument("subspace fit needs d >= 2");
  if (!(opts.variance_target > 0.0 && opts.variance_target <= 1.0)) {
    throw std::invalid_argument("variance target must lie in (0, 1]");
  }

  IdSubspace out;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = features.row(i);
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += r[j];
  }
  for (double& v : out.mean) v /= static_cast<double>(n);

  MatrixXd centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = features(i, j) - out.mean[j];
  }

  // Eigenpairs in descending order; directions are unit vectors in R^d.
  VectorXd values;
  MatrixXd directions;  // d x r, columns
  if (d <= n) {
    const MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(cov);
    values = solver.eigenvalues().reverse();
    directions = solver.eigenvectors().rowwise().reverse();
  } else {
    const MatrixXd gram = centered * centered.transpose() / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(gram);
    values = solver.eigenvalues().reverse();
    const MatrixXd u = solver.eigenvectors().rowwise().reverse();
    directions = MatrixXd::Zero(d, n);
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      if (values(c) <= 0.0) continue;
      VectorXd v = centered.transpose() * u.col(c);
      const double norm = v.norm();
      if (norm > 0.0) directions.col(c) = v / norm;
    }
  }

  const double total = values.cwiseMax(0.0).sum();
  if (!(total > 0.0)) throw DataError("subspace fit: training features have zero variance");
  const double tol = values(0) * 1e-10 * static_cast<double>(std::max(n, d));
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) rank += values(i) > tol;
  out.rank = rank;

  std::size_t dim = 0;
  if (opts.fixed_dim) {
    dim = *opts.fixed_dim;
  } else {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      acc += std::max(values(i), 0.0);
      ++dim;
      if (acc >= opts.variance_target * total * (1.0 - 1e-12)) break;
    }
  }
  dim = std::clamp<std::size_t>(dim, 1, std::max<std::size_t>(1, std::min(rank, d - 1)));

  out.basis = Matrix(dim, d);
  double kept = 0.0;
  for (std::size_t r = 0; r < dim; ++r) {
    auto row = out.basis.row(r);
    for (std::size_t j = 0; j < d; ++j) row[j] = directions(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r));
    fix_sign(row);
    kept += std::max(values(static_cast<Eigen::Index>(r)), 0.0);
  }
  out.retained_variance = kept / total;
  return out;
}

double residual_norm(std::span<const double> x, const IdSubspace& s) {
  const std::size_t d = s.mean.size();
  if (x.size() != d) throw std::invalid_argument("dimension mismatch in residual_norm");
  std::vector<double> centered(d);
  for (std::size_t j = 0; j < d; ++j) centered[j] = x[j] - s.mean[j];
  std::vector<double> resid = centered;
  for (std::size_t r = 0; r < s.basis.rows(); ++r) {
    const auto b = s.basis.row(r);
    double coef = 0.0;
    for (std::size_t j = 0; j < d; ++j) coef += b[j] * centered[j];
    for (std::size_t j = 0; j < d; ++j) resid[j] -= coef * b[j];
  }
  return std::sqrt(squared_norm(resid));
}

std::vector<double> residual_norms(const Matrix& x, const IdSubspace& subspace) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = residual_norm(x.row(i), subspace);
  return out;
}

double nearest_rank_percentile(std::vector<double> values, double percent) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(percent / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

ResidualNormalizer fit_normalizer(std::span<const double> residuals, double p_low, double p_high) {
  if (residuals.size() < 20) throw std::invalid_argument("normalizer needs at least 20 residuals");
  if (!(p_low >= 0.0 && p_low < p_high && p_high <= 100.0)) {
    throw std::invalid_argument("percentile anchors must satisfy 0 <= p_lo < p_hi <= 100");
  }
  std::vector<double> sorted(residuals.begin(), residuals.end());
  std::sort(sorted.begin(), sorted.end());

  ResidualNormalizer out;
  out.p_low = p_low;
  out.p_high = p_high;
  out.low = nearest_rank_percentile(sorted, p_low);
  out.high = nearest_rank_percentile(sorted, p_high);
  if (out.high <= out.low) {
    double spread = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      const double gap = sorted[i] - sorted[i - 1];
      if (gap > 0.0) spread = std::min(spread, gap);
    }
    if (std::isfinite(spread)) {
      out.high = out.low + spread;
    } else {
      out.high = out.low;
      out.degenerate = true;
      warn("residual normalizer: all training residuals equal; residual risk is 0 everywhere");
    }
  }
  return out;
}

double normalized_risk(double rho, const ResidualNormalizer& n) {
  if (n.degenerate) return 0.0;
  return clamp01((rho - n.low) / (n.high - n.low));
}

}  // namespace egur::residual
