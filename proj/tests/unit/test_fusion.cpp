#include "doctest.h"
#include "egur/fusion.hpp"
#include "helpers.hpp"

using namespace egur;
using namespace egur::fusion;

TEST_SUITE("fusion") {
  TEST_CASE("fused risk") {
    CHECK(fuse_risk(0.3, 0.9, 1.0) == 0.3);
    CHECK(fuse_risk(0.3, 0.9, 0.0) == 0.9);
    CHECK(fuse_risk(0.5, 0.1, 0.2) == doctest::Approx(0.18));
    CHECK(fuse_risk(0.4, 0.4, 0.5) == doctest::Approx(0.4));
  }

  TEST_CASE("threshold calibration") {
    std::vector<double> risks;
    for (int i = 1; i <= 10; ++i) risks.push_back(i / 20.0);
    const auto zero = calibrate_threshold(risks, 0.0);
    CHECK(zero.threshold == 0.5);
    CHECK(zero.achieved_krr == 0.0);
    CHECK_THROWS_AS(calibrate_threshold(risks, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, 0.2), std::invalid_argument);

    testing::WarningCapture warnings;
    const auto tied = calibrate_threshold(std::vector<double>(10, 0.2), 0.5);
    CHECK(tied.achieved_krr == 0.0);
    CHECK(tied.saturated);
    CHECK(warnings.any());
  }

  TEST_CASE("coefficient of variation") {
    CHECK(coefficient_of_variation(std::vector<double>{1.0, 3.0}) == doctest::Approx(0.5));
    CHECK_THROWS_WITH_AS(coefficient_of_variation(std::vector<double>{0.0, 0.0}),
                         "degenerate risk distribution", std::invalid_argument);
  }

  TEST_CASE("alpha rule") {
    CHECK(apply_alpha_rule(0.182, 0.231, 1.0).alpha == doctest::Approx(0.8));
    CHECK(apply_alpha_rule(0.146, 0.429, 0.8).alpha == doctest::Approx(0.6));
    const auto endpoint = apply_alpha_rule(0.371, 0.227, std::nullopt);
    CHECK(endpoint.alpha == 0.2);
    CHECK(endpoint.branch == Branch::ResidualEndpoint);
    CHECK(apply_alpha_rule(0.1, 0.2, 0.2).alpha == 0.2);
    CHECK_THROWS_AS(apply_alpha_rule(0.1, 0.2, std::nullopt), std::invalid_argument);
    CHECK_THROWS_AS(apply_alpha_rule(0.1, 0.2, 0.5), std::invalid_argument);
  }

  TEST_CASE("branch names") {
    CHECK(parse_branch(branch_name(Branch::KnownAccuracy)) == Branch::KnownAccuracy);
    CHECK(parse_branch("override") == Branch::Override);
    CHECK_FALSE(parse_branch("nope").has_value());
  }

  TEST_CASE("three-state decision") {
    CHECK(decide(0, 0.5, 0.3, 0.3, 0.5, 0.3).state == State::AcceptedKnown);
    CHECK(decide(0, 0.95, 0.8, 0.8, 0.5, 0.3, 0.90).state == State::UnsupportedKnownLike);
    CHECK(decide(0, 0.55, 0.8, 0.8, 0.5, 0.3, 0.90).state == State::OodUnknown);
  }
}
