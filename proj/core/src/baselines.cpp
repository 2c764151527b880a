#include "egur/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "egur/candidate.hpp"
#include "egur/error.hpp"

namespace egur::baselines {

const char* logit_kind_name(LogitKind kind) {
  switch (kind) {
    case LogitKind::Msp: return "msp";
    case LogitKind::Energy: return "energy";
    case LogitKind::MaxLogit: return "maxlogit";
    case LogitKind::SoftmaxEntropy: return "softmax_entropy";
  }
  return "?";
}

const char* distance_kind_name(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::Knn: return "knn";
    case DistanceKind::Prototype: return "prototype";
    case DistanceKind::DiagMahalanobis: return "diag_mahalanobis";
  }
  return "?";
}

ScalarScore logit_scores(const Matrix& logits, LogitKind kind, double temperature) {
  if (logits.cols() < 2) throw std::invalid_argument("logit scores need K >= 2");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  ScalarScore out;
  out.method = logit_kind_name(kind);
  out.values.reserve(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    for (double v : z) {
      if (!std::isfinite(v)) throw DataError("non-finite logits");
    }
    const double top = *std::max_element(z.begin(), z.end());
    switch (kind) {
      case LogitKind::Msp:
        out.values.push_back(candidate::candidate_from_logits(z, temperature).confidence);
        break;
      case LogitKind::MaxLogit:
        out.values.push_back(top);
        break;
      case LogitKind::Energy: {
        double sum = 0.0;
        for (double v : z) sum += std::exp((v - top) / temperature);
        out.values.push_back(top + temperature * std::log(sum));
        break;
      }
      case LogitKind::SoftmaxEntropy: {
        const auto p = candidate::candidate_from_logits(z, temperature).probabilities;
        double h = 0.0;
        for (double pi : p) {
          if (pi > 0.0) h -= pi * std::log(pi);
        }
        out.values.push_back(-h);
        break;
      }
    }
  }
  switch (kind) {
    case LogitKind::Msp: out.orientation = "max softmax probability"; break;
    case LogitKind::MaxLogit: out.orientation = "max logit"; break;
    case LogitKind::Energy: out.orientation = "negated free energy"; break;
    case LogitKind::SoftmaxEntropy: out.orientation = "negated softmax entropy"; break;
  }
  return out;
}

Matrix class_diagonal_variances(const local::ClassIndex& index) {
  const std::size_t d = index.dim();
  const std::size_t n = index.features.rows();
  std::vector<double> pooled_mean(d, 0.0), pooled_var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) pooled_mean[j] += index.features(i, j);
  }
  for (double& v : pooled_mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = index.features(i, j) - pooled_mean[j];
      pooled_var[j] += diff * diff;
    }
  }
  for (double& v : pooled_var) v /= static_cast<double>(n);

  Matrix var(index.num_classes, d);
  for (std::uint32_t c = 0; c < index.num_classes; ++c) {
    const auto& rows = index.members[c];
    auto out = var.row(c);
    if (rows.size() < 2) {
      std::copy(pooled_var.begin(), pooled_var.end(), out.begin());
      continue;
    }
    const auto mu = index.prototypes.row(c);
    for (std::size_t r : rows) {
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = index.features(r, j) - mu[j];
        out[j] += diff * diff;
      }
    }
    for (double& v : out) v /= static_cast<double>(rows.size());
  }
  return var;
}

ScalarScore distance_scores(const Matrix& x, const local::ClassIndex& index, DistanceKind kind,
                            std::uint32_t k) {
  if (x.cols() != index.dim()) throw std::invalid_argument("dimension mismatch");
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  ScalarScore out;
  out.method = distance_kind_name(kind);
  out.values.reserve(x.rows());
  Matrix var;
  if (kind == DistanceKind::DiagMahalanobis) var = class_diagonal_variances(index);
  const std::size_t n_train = index.features.rows();
  const std::size_t depth = std::min<std::size_t>(k, n_train);
  std::vector<double> dists(n_train);

  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    switch (kind) {
      case DistanceKind::Knn: {
        for (std::size_t r = 0; r < n_train; ++r) dists[r] = euclidean_distance(xi, index.features.row(r));
        std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(depth - 1), dists.end());
        out.values.push_back(-dists[depth - 1]);
        break;
      }
      case DistanceKind::Prototype: {
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t c = 0; c < index.num_classes; ++c) {
          best = std::min(best, euclidean_distance(xi, index.prototypes.row(c)));
        }
        out.values.push_back(-best);
        break;
      }
      case DistanceKind::DiagMahalanobis: {
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t c = 0; c < index.num_classes; ++c) {
          const auto mu = index.prototypes.row(c);
          const auto v = var.row(c);
          double s = 0.0;
          for (std::size_t j = 0; j < xi.size(); ++j) {
            const double diff = xi[j] - mu[j];
            s += diff * diff / (v[j] + kVarianceFloor);
          }
          best = std::min(best, s);
        }
        out.values.push_back(-best);
        break;
      }
    }
  }
  out.orientation = "negated distance";
  return out;
}

ScalarScore residual_only_score(const Matrix& x, const residual::IdSubspace& subspace,
                                const residual::ResidualNormalizer& normalizer) {
  ScalarScore out;
  out.method = "residual_only";
  out.orientation = "negated residual risk";
  out.values.reserve(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out.values.push_back(-residual::residual_risk(x.row(i), subspace, normalizer));
  }
  return out;
}

double MinMax::apply(double v) const {
  if (!(hi > lo)) return 0.0;
  return clamp01((v - lo) / (hi - lo));
}

MinMax fit_minmax(std::span<const double> calib_values) {
  if (calib_values.empty()) throw std::invalid_argument("min-max normalization needs values");
  const auto [lo, hi] = std::minmax_element(calib_values.begin(), calib_values.end());
  return {*lo, *hi};
}

ScalarScore naive_fusion_score(std::span<const double> msp_norm,
                               std::span<const double> residual_knownness, double beta) {
  if (msp_norm.size() != residual_knownness.size()) throw std::invalid_argument("length mismatch");
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
  ScalarScore out;
  out.method = "naive_fusion";
  out.orientation = "weighted normalized msp and residual knownness";
  out.values.resize(msp_norm.size());
  for (std::size_t i = 0; i < msp_norm.size(); ++i) {
    out.values[i] = beta * msp_norm[i] + (1.0 - beta) * residual_knownness[i];
  }
  return out;
}

}  // namespace egur::baselines
