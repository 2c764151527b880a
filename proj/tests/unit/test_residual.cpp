#include <cmath>

#include "doctest.h"
#include "egur/residual.hpp"
#include "helpers.hpp"
#include "suite.hpp"

using namespace egur;
using namespace egur::residual;

TEST_SUITE("residual") {
  TEST_CASE("planar data gives a two-dimensional subspace") {
    Matrix x = testing::random_matrix(50, 8, 3);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double a = x(i, 0), b = x(i, 1);
      for (std::size_t j = 0; j < 8; ++j) x(i, j) = a * (j < 4 ? 1.0 : 0.0) + b * (j % 2 == 0 ? 1.0 : -1.0);
    }
    const auto sub = fit_subspace(x);
    CHECK(sub.dim() == 2);
    for (double r : residual_norms(x, sub)) CHECK(r < 1e-9);
  }

  TEST_CASE("basis is orthonormal and residual of an orthogonal unit vector is one") {
    const auto sub = fit_subspace(testing::random_matrix(80, 6, 4), {0.9, std::size_t{3}});
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 3; ++b) {
        double dot = 0.0;
        for (std::size_t j = 0; j < 6; ++j) dot += sub.basis(a, j) * sub.basis(b, j);
        CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-6);
      }
    }
    // Gram-Schmidt a coordinate vector against the basis
    std::vector<double> v(6, 0.0);
    for (std::size_t axis = 0; axis < 6; ++axis) {
      std::fill(v.begin(), v.end(), 0.0);
      v[axis] = 1.0;
      for (std::size_t r = 0; r < 3; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < 6; ++j) dot += sub.basis(r, j) * v[j];
        for (std::size_t j = 0; j < 6; ++j) v[j] -= dot * sub.basis(r, j);
      }
      if (squared_norm(v) > 0.1) break;
    }
    l2_normalize(v);
    std::vector<double> x = sub.mean;
    for (std::size_t j = 0; j < 6; ++j) x[j] += v[j];
    CHECK(residual_norm(x, sub) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(residual_norm(sub.mean, sub) == doctest::Approx(0.0));
    CHECK_THROWS_AS(residual_norm(std::vector<double>(5, 0.0), sub), std::invalid_argument);
  }

  TEST_CASE("fit errors") {
    CHECK_THROWS_AS(fit_subspace(Matrix(1, 4)), std::invalid_argument);
    CHECK_THROWS_AS(fit_subspace(Matrix(5, 4)), DataError);
    CHECK_THROWS_AS(fit_subspace(testing::random_matrix(5, 4, 1), {1.5, std::nullopt}), std::invalid_argument);
  }

  TEST_CASE("normalizer anchors") {
    std::vector<double> r;
    for (int i = 0; i < 40; ++i) r.push_back(i);
    const auto all = fit_normalizer(r, 0.0, 100.0);
    CHECK(all.low == 0.0);
    CHECK(all.high == 39.0);
    CHECK_THROWS_AS(fit_normalizer(std::vector<double>(10, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(fit_normalizer(r, 60.0, 40.0), std::invalid_argument);

    testing::WarningCapture warnings;
    const auto flat = fit_normalizer(std::vector<double>(25, 3.0));
    CHECK(flat.degenerate);
    CHECK(warnings.any());
    CHECK(normalized_risk(7.0, flat) == 0.0);
  }

  TEST_CASE("normalized risk") {
    ResidualNormalizer n;
    n.low = 2.0;
    n.high = 4.0;
    CHECK(normalized_risk(2.0, n) == 0.0);
    CHECK(normalized_risk(4.0, n) == 1.0);
    CHECK(normalized_risk(3.0, n) == 0.5);
    CHECK(normalized_risk(9.0, n) == 1.0);
    CHECK(normalized_risk(0.0, n) == 0.0);
  }

  TEST_CASE("most training residuals stay below the upper anchor") {
    const Matrix x = testing::random_matrix(200, 10, 5);
    const auto sub = fit_subspace(x, {0.9, std::size_t{4}});
    const auto rho = residual_norms(x, sub);
    const auto n = fit_normalizer(rho);
    double saturated = 0.0;
    for (double r : rho) saturated += normalized_risk(r, n) == 1.0;
    CHECK(saturated / 200.0 <= 1.0 - 0.95 + 1.0 / 200.0 + 1e-12);
  }
}
