#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "egur/baselines.hpp"
#include "egur/error.hpp"
#include "egur/fusion.hpp"
#include "suite.hpp"

using namespace egur;
using namespace egur::baselines;

namespace {

std::vector<std::size_t> ranking(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return order;
}

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("two-class symmetric logits") {
    const Matrix z(1, 2, std::vector<double>{0.0, 0.0});
    CHECK(logit_scores(z, LogitKind::Msp).values[0] == doctest::Approx(0.5));
    CHECK(logit_scores(z, LogitKind::Energy).values[0] == doctest::Approx(std::log(2.0)));
    CHECK(logit_scores(z, LogitKind::MaxLogit).values[0] == 0.0);
    CHECK(logit_scores(z, LogitKind::SoftmaxEntropy).values[0] == doctest::Approx(-std::log(2.0)));
  }

  TEST_CASE("shift identities") {
    const Matrix z = testing::random_matrix(5, 4, 8);
    Matrix shifted = z;
    for (double& v : shifted.data()) v += 3.5;
    for (auto kind : {LogitKind::Msp, LogitKind::SoftmaxEntropy}) {
      const auto a = logit_scores(z, kind).values, b = logit_scores(shifted, kind).values;
      for (std::size_t i = 0; i < 5; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
    for (auto kind : {LogitKind::MaxLogit, LogitKind::Energy}) {
      const auto a = logit_scores(z, kind).values, b = logit_scores(shifted, kind).values;
      for (std::size_t i = 0; i < 5; ++i) CHECK(b[i] - a[i] == doctest::Approx(3.5).epsilon(1e-12));
    }
    Matrix bad = z;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_WITH_AS(logit_scores(bad, LogitKind::Msp), "non-finite logits", DataError);
  }

  TEST_CASE("distance score endpoints") {
    const Matrix x(4, 2, std::vector<double>{-1, 0, 1, 0, 9, -1, 11, 1});
    const std::vector<std::int32_t> y = {0, 0, 1, 1};
    const auto index = local::fit_class_index(x, y, 2, 1, 1, false);
    const Matrix q(1, 2, std::vector<double>{-1, 0});
    CHECK(distance_scores(q, index, DistanceKind::Knn, 1).values[0] == 0.0);
    const auto var = class_diagonal_variances(index);
    CHECK(var(0, 0) == 1.0);
    CHECK(var(0, 1) == 0.0);
    const Matrix mu(1, 2, std::vector<double>{10, 0});
    CHECK(distance_scores(mu, index, DistanceKind::DiagMahalanobis, 1).values[0] == 0.0);
    CHECK(distance_scores(mu, index, DistanceKind::Prototype, 1).values[0] == 0.0);
  }

  TEST_CASE("distance scores ignore training order") {
    const Matrix x = testing::random_matrix(30, 4, 12);
    std::vector<std::int32_t> y(30);
    for (int i = 0; i < 30; ++i) y[i] = i % 3;
    Matrix rx(30, 4);
    std::vector<std::int32_t> ry(30);
    for (std::size_t i = 0; i < 30; ++i) {
      for (std::size_t j = 0; j < 4; ++j) rx(i, j) = x(29 - i, j);
      ry[i] = y[29 - i];
    }
    const auto a = local::fit_class_index(x, y, 3, 3, 5, false);
    const auto b = local::fit_class_index(rx, ry, 3, 3, 5, false);
    const Matrix q = testing::random_matrix(6, 4, 13);
    for (auto kind : {DistanceKind::Knn, DistanceKind::Prototype, DistanceKind::DiagMahalanobis}) {
      const auto sa = distance_scores(q, a, kind, 3).values, sb = distance_scores(q, b, kind, 3).values;
      for (std::size_t i = 0; i < 6; ++i) CHECK(sa[i] == doctest::Approx(sb[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("residual-only score") {
    const auto sub = residual::fit_subspace(testing::random_matrix(40, 5, 14), {0.9, std::size_t{2}});
    residual::ResidualNormalizer n;
    n.low = 0.0;
    n.high = 2.0;
    Matrix q(2, 5);
    for (std::size_t j = 0; j < 5; ++j) q(0, j) = sub.mean[j];
    const auto s = residual_only_score(q, sub, n).values;
    CHECK(s[0] == 0.0);
    CHECK(s[1] <= 0.0);
    CHECK(s[1] == -residual::residual_risk(q.row(1), sub, n));
  }

  TEST_CASE("naive fusion endpoints") {
    const std::vector<double> msp = {0.9, 0.2, 0.6, 0.4};
    const std::vector<double> rk = {0.1, 0.7, 0.3, 0.8};
    CHECK(ranking(naive_fusion_score(msp, rk, 1.0).values) == ranking(msp));
    CHECK(ranking(naive_fusion_score(msp, rk, 0.0).values) == ranking(rk));
    CHECK_THROWS_AS(naive_fusion_score(msp, rk, 1.5), std::invalid_argument);
    const auto mm = fit_minmax(std::vector<double>{2.0, 4.0});
    CHECK(mm.apply(3.0) == 0.5);
    CHECK(fit_minmax(std::vector<double>{1.0, 1.0}).apply(5.0) == 0.0);
  }
}
