#include <set>

#include "doctest.h"
#include "egur/error.hpp"
#include "egur/pipeline.hpp"
#include "suite.hpp"

using namespace egur;

namespace {

const store::SyntheticDataset& dataset() {
  static const store::SyntheticDataset ds = [] {
    store::SyntheticSpec spec;
    spec.seed = 17;
    spec.far_ood_count = 20;
    return store::generate_synthetic(spec);
  }();
  return ds;
}

PipelineConfig quick_config() {
  PipelineConfig c;
  c.probe.epochs = 60;
  return c;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("calibration carve is stratified and deterministic") {
    const auto& train = dataset().packs.at("known_train");
    const auto [a, b] = carve_calibration(train, 0.2, 3);
    const auto [a2, b2] = carve_calibration(train, 0.2, 3);
    CHECK(a == a2);
    CHECK(b == b2);
    CHECK(a.n + b.n == train.n);
    CHECK(b.n == 5 * 8);
    std::set<std::string> ids(a.ids.begin(), a.ids.end());
    for (const auto& id : b.ids) CHECK(ids.count(id) == 0);
  }

  TEST_CASE("config json round-trip") {
    PipelineConfig c;
    c.fixed_dim = 7;
    c.alpha_override = 0.6;
    c.checks = "sup,mar";
    c.probe.epochs = 12;
    CHECK(pipeline_config_from_json(pipeline_config_to_json(c)) == c);
  }

  TEST_CASE("fit, score and bundle round-trip") {
    const auto& ds = dataset();
    const auto model = fit_model(ds.packs.at("known_train"), ds.packs.at("known_calib"), quick_config());
    CHECK(model.alpha() >= 0.2);
    CHECK(model.operating_point.threshold >= 0.0);
    const auto bytes = encode_bundle(model);
    CHECK(bytes == encode_bundle(fit_model(ds.packs.at("known_train"), ds.packs.at("known_calib"), quick_config())));
    const auto back = decode_bundle(bytes);
    CHECK(encode_bundle(back) == bytes);
    const auto& test = ds.packs.at("known_test");
    const auto s1 = score_pack(model, test);
    const auto s2 = score_pack(back, test);
    REQUIRE(s1.size() == test.n);
    for (std::size_t i = 0; i < s1.size(); ++i) {
      CHECK(s1[i].r_a == s2[i].r_a);
      CHECK(s1[i].candidate.candidate == s2[i].candidate.candidate);
    }
    auto broken = bytes;
    broken[1] = 'x';
    CHECK_THROWS_AS(decode_bundle(broken), DataError);
  }

  TEST_CASE("alpha override") {
    auto c = quick_config();
    c.alpha_override = 0.6;
    const auto& ds = dataset();
    const auto model = fit_model(ds.packs.at("known_train"), ds.packs.at("known_calib"), c);
    CHECK(model.alpha() == 0.6);
    CHECK(model.selection.branch == fusion::Branch::Override);
  }
}
