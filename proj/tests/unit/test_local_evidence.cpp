#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "egur/local_evidence.hpp"

using namespace egur;
using namespace egur::local;

namespace {

ClassIndex two_class(std::uint32_t k = 1, std::uint32_t m = 2) {
  const Matrix x(4, 2, std::vector<double>{0, 0, 2, 0, 10, 0, 12, 0});
  const std::vector<std::int32_t> y = {0, 0, 1, 1};
  return fit_class_index(x, y, 2, k, m, false);
}

}  // namespace

TEST_SUITE("local_evidence") {
  TEST_CASE("index construction") {
    const auto idx = two_class();
    CHECK(idx.prototypes(0, 0) == 1.0);
    CHECK(idx.prototypes(0, 1) == 0.0);
    const Matrix x(2, 2, std::vector<double>{3, 4, 0, 1});
    const std::vector<std::int32_t> y = {0, 1};
    const auto norm = fit_class_index(x, y, 2, 1, 1, true);
    CHECK(norm.features(0, 0) == doctest::Approx(0.6));
    CHECK(norm.features(0, 1) == doctest::Approx(0.8));
    const std::vector<std::int32_t> only0 = {0, 0};
    CHECK_THROWS_AS(fit_class_index(x, only0, 2, 1, 1, false), std::invalid_argument);
  }

  TEST_CASE("support distance") {
    const Matrix x(2, 2, std::vector<double>{0, 0, 9, 9});
    const std::vector<std::int32_t> y = {0, 1};
    const auto idx = fit_class_index(x, y, 2, 1, 1, false);
    const std::vector<double> q = {2, 0};
    CHECK(support_distance(q, 0, idx).distance == 2.0);
    const std::vector<double> on = {0, 0};
    CHECK(support_distance(on, 0, idx).distance == 0.0);
    const auto deep = fit_class_index(x, y, 2, 5, 1, false);
    CHECK(support_distance(q, 0, deep).depth == 1);
  }

  TEST_CASE("contrast") {
    const auto idx = two_class();
    const std::vector<double> mid = {6, 0};
    CHECK(contrast_ratio(mid, 0, idx) == doctest::Approx(1.0));
    const std::vector<double> on = {0, 0};
    CHECK(contrast_ratio(on, 0, idx) == 0.0);
    const std::vector<double> on_other = {10, 0};
    CHECK(std::isinf(contrast_ratio(on_other, 0, idx)));
  }

  TEST_CASE("purity") {
    const auto idx = two_class(1, 2);
    const std::vector<double> left = {1, 0};
    CHECK(local_purity(left, 0, idx) == 1.0);
    CHECK(local_purity(left, 1, idx) == 0.0);
  }

  TEST_CASE("margin") {
    const auto idx = two_class();
    const std::vector<double> at = {1, 0};
    CHECK(prototype_margin(at, 0, idx) == doctest::Approx(1.0));
    const std::vector<double> mid = {6, 0};
    CHECK(prototype_margin(mid, 0, idx) == doctest::Approx(0.0));
  }

  TEST_CASE("conflict levels") {
    const auto idx = two_class(1, 2);
    const std::vector<double> left = {1, 0};
    CHECK(conflict_level(left, 0, idx) == 0.0);
    CHECK(conflict_level(left, 1, idx) == 1.0);
    // nearest prototype is class 1, but the two nearest points are split,
    // so the majority vote ties to class 0
    const std::vector<double> q = {6.5, 0};
    const auto mixed = fit_class_index(Matrix(4, 2, std::vector<double>{0, 0, 6, 0, 7, 0, 12, 0}),
                                       std::vector<std::int32_t>{0, 0, 1, 1}, 2, 1, 2, false);
    CHECK(conflict_level(q, 0, mixed) == 0.5);
  }

  TEST_CASE("support thresholds") {
    const Matrix x(6, 1 + 1, std::vector<double>{0, 0, 0, 0, 3, 0, 9, 9, 9, 10, 9, 12});
    const std::vector<std::int32_t> y = {0, 0, 0, 1, 1, 1};
    const auto idx = fit_class_index(x, y, 2, 1, 1, false);
    const auto th = calibrate_support_thresholds(idx);
    // class 0 has duplicates but one leave-one-out distance is positive
    CHECK(th.support[0] == 3.0);
    const Matrix dup(4, 2, std::vector<double>{0, 0, 0, 0, 5, 5, 5, 6});
    const auto didx = fit_class_index(dup, std::vector<std::int32_t>{0, 0, 1, 1}, 2, 1, 1, false);
    const auto dth = calibrate_support_thresholds(didx);
    CHECK(dth.support_degenerate[0]);
    CHECK(dth.support[0] == 1.0);
    CHECK(nearest_rank_quantile({3, 1, 2}, 0.5) == 2.0);
  }

  TEST_CASE("strengths") {
    EvidenceThresholds th;
    th.support = {2.0};
    Measurements m;
    m.support = 0.0;
    m.contrast = 1.0;
    m.purity = 1.0;
    m.margin = 1.0;
    auto ev = evidence_strengths(m, 0, th);
    CHECK(*ev.s_sup == 1.0);
    CHECK(*ev.s_con == doctest::Approx(1.0 / 3.0));
    CHECK(*ev.s_pur == 1.0);
    CHECK(*ev.s_mar == doctest::Approx(0.95));
    CHECK_FALSE(ev.s_conf.has_value());
    m.support = 2.0;
    ev = evidence_strengths(m, 0, th);
    CHECK(*ev.s_sup == 0.0);
    CHECK(ev.r_local == 1.0);
    m.margin = -std::numeric_limits<double>::infinity();
    m.support = 0.0;
    CHECK(*evidence_strengths(m, 0, th).s_mar == 0.0);
  }

  TEST_CASE("local risk") {
    CHECK(local_risk(std::vector<double>{1.0, 0.8, 0.3}) == doctest::Approx(0.7));
    CHECK(local_risk(std::vector<double>{1.0, 1.0}) == 0.0);
    CHECK(local_risk(std::vector<double>{0.0, 0.9, 1.0}) == 1.0);
    CHECK_THROWS_AS(local_risk(std::vector<double>{}), std::invalid_argument);
  }

  TEST_CASE("check mask parsing") {
    CHECK(CheckMask::parse("sup,con,pur,mar") == CheckMask::standard());
    CHECK(CheckMask::parse("sup,conf").has(Check::Conflict));
    CHECK_THROWS_AS(CheckMask::parse("sup,nope"), std::invalid_argument);
    CHECK_THROWS_AS(CheckMask::parse(""), std::invalid_argument);
    CHECK(CheckMask::parse(CheckMask::standard().to_string()) == CheckMask::standard());
  }
}
