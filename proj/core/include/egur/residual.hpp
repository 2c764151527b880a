#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "egur/matrix.hpp"

namespace egur::residual {

// Principal subspace of known training features. `basis` rows are orthonormal
// directions; each row's largest-magnitude coordinate is positive.
struct IdSubspace {
  std::vector<double> mean;
  Matrix basis;  // D x d
  double retained_variance = 0.0;  // fraction of total variance kept by the basis
  std::size_t rank = 0;

  std::size_t dim() const { return basis.rows(); }
};

struct SubspaceOptions {
  double variance_target = 0.90;
  std::optional<std::size_t> fixed_dim;
};

// PCA via the covariance or the Gram matrix, whichever is smaller.
// D is clamped to [1, min(rank, d - 1)].
IdSubspace fit_subspace(const Matrix& features, SubspaceOptions opts = {});

// ||(x - mean) - B^T B (x - mean)||_2
double residual_norm(std::span<const double> x, const IdSubspace& subspace);

std::vector<double> residual_norms(const Matrix& x, const IdSubspace& subspace);

struct ResidualNormalizer {
  double low = 0.0;   // rho_lo
  double high = 1.0;  // rho_hi
  double p_low = 5.0;
  double p_high = 95.0;
  // All training residuals identical: risk is 0 everywhere.
  bool degenerate = false;
};

// Nearest-rank percentile anchors over >= 20 residuals.
ResidualNormalizer fit_normalizer(std::span<const double> residuals, double p_low = 5.0,
                                  double p_high = 95.0);

double normalized_risk(double rho, const ResidualNormalizer& normalizer);

inline double residual_risk(std::span<const double> x, const IdSubspace& subspace,
                            const ResidualNormalizer& normalizer) {
  return normalized_risk(residual_norm(x, subspace), normalizer);
}

// 1-based nearest rank ceil(p/100 * n), clamped to [1, n], over sorted values.
double nearest_rank_percentile(std::vector<double> values, double percent);

}  // namespace egur::residual
