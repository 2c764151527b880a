#pragma once

#include <map>
#include <string>
#include <vector>

#include "egur/local_evidence.hpp"
#include "egur/matrix.hpp"
#include "egur/residual.hpp"

namespace egur::baselines {

// Per-sample knownness score; larger always means "more known".
struct ScalarScore {
  std::string method;
  std::vector<double> values;
  // How the underlying statistic was turned into "higher = known".
  std::string orientation;
};

enum class LogitKind { Msp, Energy, MaxLogit, SoftmaxEntropy };
const char* logit_kind_name(LogitKind kind);

// msp = max softmax; energy = T log sum exp(z / T); maxlogit = max z;
// softmax_entropy = -H(softmax(z / T)), a stand-in for generalized entropy.
ScalarScore logit_scores(const Matrix& logits, LogitKind kind, double temperature = 1.0);

enum class DistanceKind { Knn, Prototype, DiagMahalanobis };
const char* distance_kind_name(DistanceKind kind);

inline constexpr double kVarianceFloor = 1e-6;

// Per-class diagonal variances of the index's training features (population
// variance); classes with fewer than two samples use the pooled variance.
Matrix class_diagonal_variances(const local::ClassIndex& index);

// `x` must already be prepared the same way as the index features.
// knn = -(k-th NN distance over pooled known features)
// prototype = -min_c ||x - mu_c||
// diag_mahalanobis = -min_c sum_i (x_i - mu_ci)^2 / (var_ci + eps)
ScalarScore distance_scores(const Matrix& x, const local::ClassIndex& index, DistanceKind kind,
                            std::uint32_t k);

// score = -r_res; thresholding it equals the fused rule with alpha = 0.
ScalarScore residual_only_score(const Matrix& x, const residual::IdSubspace& subspace,
                                const residual::ResidualNormalizer& normalizer);

struct MinMax {
  double lo = 0.0;
  double hi = 1.0;
  double apply(double v) const;
};
MinMax fit_minmax(std::span<const double> calib_values);

// beta * msp_norm + (1 - beta) * residual_knownness, inputs already in [0, 1].
ScalarScore naive_fusion_score(std::span<const double> msp_norm,
                               std::span<const double> residual_knownness, double beta);

}  // namespace egur::baselines
