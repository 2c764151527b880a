#include "doctest.h"
#include "egur/csv.hpp"
#include "egur/metrics.hpp"
#include "helpers.hpp"

using namespace egur;
using namespace egur::metrics;

namespace {

Record known(bool accepted, bool correct = true) {
  Record r;
  r.role = Role::KnownTest;
  r.label = 1;
  r.candidate = correct ? 1 : 2;
  r.accepted = accepted;
  return r;
}

Record unknown(bool accepted, double q = 0.5, std::string cls = "u/a") {
  Record r;
  r.role = Role::UnknownTest;
  r.accepted = accepted;
  r.confidence = q;
  r.unknown_class = std::move(cls);
  return r;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("core rates endpoints") {
    std::vector<Record> perfect = {known(true), known(true), unknown(false), unknown(false)};
    const auto p = core_rates(perfect);
    CHECK(p.known_acc == 1.0);
    CHECK(p.krr == 0.0);
    CHECK(p.fkar == 0.0);
    std::vector<Record> all = {known(true), known(true, false), unknown(true)};
    CHECK(core_rates(all).krr == 0.0);
    CHECK(core_rates(all).fkar == 1.0);
    std::vector<Record> none = {known(true)};
    CHECK_THROWS_WITH_AS(core_rates(none), "empty split", std::invalid_argument);
  }

  TEST_CASE("hc-fkar undefined and collapse") {
    std::vector<Record> r = {unknown(true, 0.5), unknown(false, 0.7)};
    CHECK_FALSE(hc_fkar_at(r, 1.01).has_value());
    CHECK(hc_fkar_at(r, 0.0) == 0.5);
  }

  TEST_CASE("auroc and fpr endpoints") {
    const std::vector<double> k = {2, 3}, u = {0, 1};
    CHECK(auroc(k, u) == 1.0);
    CHECK(auroc(std::vector<double>{1, 1}, std::vector<double>{1, 1}) == 0.5);
    CHECK(fpr_at_tpr(k, u) == 0.0);
    CHECK(fpr_at_tpr(u, k) == 1.0);
    CHECK_THROWS_AS(auroc(std::vector<double>{}, u), std::invalid_argument);
    CHECK_THROWS_AS(fpr_at_tpr(k, std::vector<double>{}), std::invalid_argument);
  }

  TEST_CASE("matched threshold endpoints") {
    const std::vector<double> k = {3, 1, 2};
    const auto zero = matched_krr_threshold(k, 0.0);
    CHECK(zero.threshold <= 1.0);
    CHECK(zero.achieved_krr == 0.0);
    testing::WarningCapture warnings;
    const auto tied = matched_krr_threshold(std::vector<double>(8, 0.4), 0.5);
    CHECK(tied.achieved_krr == 0.0);
    CHECK(tied.saturated);
    CHECK(warnings.any());
    CHECK(tpr_threshold(std::vector<double>{1, 2, 3, 4}, 0.75) == 2.0);
  }

  TEST_CASE("bootstrap degenerate cases") {
    std::vector<Record> rejected = {unknown(false, 0.9, "a"), unknown(false, 0.95, "b"), known(true)};
    BootstrapOptions opts;
    opts.repeats = 50;
    const auto r = bootstrap_stratified(rejected, opts);
    CHECK(r.fkar.mean == 0.0);
    CHECK(r.fkar.std == 0.0);
    CHECK(r.classes == 2);

    std::vector<Record> single = {unknown(true, 0.99, "only")};
    opts.per_class = 1;
    const auto s = bootstrap_stratified(single, opts);
    CHECK(s.fkar.mean == 1.0);
    CHECK(s.fkar.std == 0.0);
    CHECK(s.hc_fkar.at(0.90).defined == 50);

    std::vector<Record> empty = {known(true)};
    CHECK_THROWS_AS(bootstrap_stratified(empty, opts), std::invalid_argument);
    opts.repeats = 0;
    CHECK_THROWS_AS(bootstrap_stratified(single, opts), std::invalid_argument);
  }

  TEST_CASE("sweep endpoints") {
    SweepInputs in;
    in.method = "m";
    for (int i = 0; i < 20; ++i) {
      in.calib_scores.push_back(i);
      in.calib_labels.push_back(0);
      in.calib_candidates.push_back(0);
      Record k = known(true);
      k.score = i + 0.5;
      in.test.push_back(k);
      Record u = unknown(true, 0.95);
      u.score = i - 5.0;
      in.test.push_back(u);
    }
    const std::vector<double> targets = {0.0, 0.5, 0.95};
    const auto rows = operating_curve_sweep(in, TargetKind::Krr, targets);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].calib_value == 0.0);
    CHECK(rows[0].fkar == doctest::Approx(15.0 / 20.0));
    CHECK(rows[2].known_acc <= 0.1);
    CHECK(rows[0].calib_value <= rows[1].calib_value);
    CHECK(rows[1].calib_value <= rows[2].calib_value);
    const auto table = sweep_table(rows);
    CHECK(table.rows.size() == 3);
    CHECK(table.column("flagged") < table.header.size());

    const std::vector<double> acc_targets = {0.3, 0.6};
    const auto acc = operating_curve_sweep(in, TargetKind::KnownAcc, acc_targets);
    CHECK(acc[0].calib_value == doctest::Approx(0.3).epsilon(0.06));
  }

  TEST_CASE("report rendering") {
    EvalReport report;
    std::vector<Record> r = {known(true), known(false), unknown(true, 0.95), unknown(false, 0.2)};
    r[0].score = 0.9;
    r[1].score = 0.1;
    r[2].score = 0.8;
    r[3].score = 0.05;
    report.rows.push_back(evaluate_method("default", "x", 0.5, r, report.hc_thresholds));
    const auto& row = report.rows[0];
    CHECK(row.krr == 0.5);
    CHECK(row.hc_fkar.at(0.99) == std::nullopt);
    CHECK(row.auroc.has_value());
    CHECK_FALSE(row.far_ood_fkar.has_value());
    const auto table = report_table(report);
    CHECK(table.header.front() == "table");
    CHECK(table.rows[0][table.column(hc_column(0.99))] == "n/a");
    CHECK(hc_column(0.9) == "hc_fkar@0.90");
    const auto parsed = csv::parse(csv::to_string(table));
    CHECK(parsed.rows == table.rows);
    CHECK(report_json(report).find("\"tables\"") != std::string::npos);
    CHECK(report.find("default", "x") != nullptr);
    CHECK(report.find("matched", "x") == nullptr);
  }

  TEST_CASE("csv quoting and errors") {
    csv::Table t{{"a", "b"}, {{"1,2", "say \"hi\""}}};
    CHECK(csv::parse(csv::to_string(t)).rows == t.rows);
    CHECK_THROWS_AS(csv::parse("a,b\n1\n"), DataError);
    CHECK_THROWS_AS(csv::parse(""), DataError);
    CHECK(csv::format_optional(std::nullopt) == "n/a");
    CHECK_FALSE(csv::parse_optional("n/a").has_value());
    CHECK(csv::parse_optional(csv::format_number(0.125)) == 0.125);
  }
}
