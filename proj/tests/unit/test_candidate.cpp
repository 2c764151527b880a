#include <cmath>

#include "doctest.h"
#include "egur/candidate.hpp"
#include "egur/error.hpp"
#include "suite.hpp"

using namespace egur;
using namespace egur::candidate;

TEST_SUITE("candidate") {
  TEST_CASE("symmetric logits tie to the lowest class") {
    const std::vector<double> z = {0.0, 0.0};
    const auto out = candidate_from_logits(z);
    CHECK(out.candidate == 0);
    CHECK(out.confidence == doctest::Approx(0.5));
    CHECK(out.probabilities[1] == doctest::Approx(0.5));
  }

  TEST_CASE("shift invariance") {
    const std::vector<double> z = {1.0, 3.0, -2.0};
    const std::vector<double> shifted = {8.0, 10.0, 5.0};
    const auto a = candidate_from_logits(z);
    const auto b = candidate_from_logits(shifted);
    CHECK(a.candidate == b.candidate);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.probabilities[i] == doctest::Approx(b.probabilities[i]).epsilon(1e-12));
  }

  TEST_CASE("bad temperature") {
    const std::vector<double> z = {1.0, 0.0};
    CHECK_THROWS_AS(candidate_from_logits(z, 0.0), std::invalid_argument);
  }

  TEST_CASE("prototype fallback limits") {
    Matrix protos(4, 2, std::vector<double>{0, 0, 10, 0, 0, 10, 5, 5});
    Matrix at(1, 2, std::vector<double>{5, 5});
    const auto sharp = prototype_softmax_fallback(protos, at, 0.01);
    CHECK(sharp[0].candidate == 3);
    CHECK(sharp[0].confidence > 0.999);

    Matrix sym(2, 2, std::vector<double>{-1, 0, 1, 0});
    Matrix mid(1, 2, std::vector<double>{0, 3});
    const auto u = prototype_softmax_fallback(sym, mid, 1.0);
    CHECK(u[0].probabilities[0] == doctest::Approx(0.5));
    CHECK_THROWS_AS(prototype_softmax_fallback(Matrix(1, 2), mid, 1.0), std::invalid_argument);
  }

  TEST_CASE("probe training rejects bad input") {
    const Matrix x = testing::random_matrix(10, 3, 1);
    std::vector<std::int32_t> one(10, 0);
    CHECK_THROWS_AS(train_linear_probe(x, one, 2, {}), std::invalid_argument);
    std::vector<std::int32_t> y(10);
    for (int i = 0; i < 10; ++i) y[i] = i % 2;
    ProbeHyper wild;
    wild.step_size = 1e6;
    wild.l2 = 1e6;
    CHECK_THROWS_AS(train_linear_probe(x, y, 2, wild), DataError);
    const auto probe = train_linear_probe(x, y, 2, {});
    CHECK_THROWS_AS(probe_logits(probe, testing::random_matrix(2, 4, 2)), std::invalid_argument);
  }

  TEST_CASE("loss is non-increasing under the default schedule") {
    const Matrix x = testing::random_matrix(60, 5, 3);
    std::vector<std::int32_t> y(60);
    for (int i = 0; i < 60; ++i) y[i] = (x(i, 0) > 0) + (x(i, 1) > 0);
    const auto probe = train_linear_probe(x, y, 3, {});
    REQUIRE(probe.loss_history.size() == probe.hyper.epochs);
    for (std::size_t e = 1; e < probe.loss_history.size(); ++e) {
      CHECK(probe.loss_history[e] <= probe.loss_history[e - 1] + 1e-12);
    }
  }

  TEST_CASE("probe serialization is exact") {
    const Matrix x = testing::random_matrix(30, 4, 4);
    std::vector<std::int32_t> y(30);
    for (int i = 0; i < 30; ++i) y[i] = i % 3;
    const auto probe = train_linear_probe(x, y, 3, {});
    const auto back = decode_probe(encode_probe(probe));
    CHECK(back == probe);
    CHECK(probe_logits(back, x) == probe_logits(probe, x));
    auto bytes = encode_probe(probe);
    bytes[0] = 'Z';
    CHECK_THROWS_AS(decode_probe(bytes), DataError);
  }

  TEST_CASE("gradient check") {
    const auto r = testing::run_gradient_check(3, 9);
    CHECK(r.max_relative_error < 1e-4);
  }
}
