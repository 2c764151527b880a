#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egur/csv.hpp"

namespace egur::metrics {

enum class Role { KnownTest, UnknownTest, FarOod };
const char* role_name(Role role);

struct Record {
  Role role = Role::KnownTest;
  std::int32_t label = -1;
  std::int32_t candidate = 0;
  double confidence = 0.0;  // q
  bool accepted = false;
  std::string unknown_class;  // stratum for the bootstrap
  std::optional<double> score;
};

inline const std::vector<double> kDefaultHcThresholds = {0.80, 0.85, 0.90, 0.95, 0.99};

struct CoreRates {
  double known_acc = 0.0;
  double krr = 0.0;
  double fkar = 0.0;
};

// Throws std::invalid_argument("empty split") without known-test or
// unknown-test records.
CoreRates core_rates(std::span<const Record> records);

// Fraction of records with role `role` that were accepted; nullopt if none.
std::optional<double> acceptance_rate(std::span<const Record> records, Role role);

// Accepted unknowns with q >= t over unknowns with q >= t; nullopt when no
// unknown reaches t.
std::optional<double> hc_fkar_at(std::span<const Record> records, double t);

// P(known score > unknown score) + 0.5 P(tie).
double auroc(std::span<const double> known, std::span<const double> unknown);

// Threshold = largest value that still accepts >= tpr of the knowns; returns
// the fraction of unknowns with score >= threshold.
double fpr_at_tpr(std::span<const double> known, std::span<const double> unknown,
                  double tpr = 0.95);

struct MatchedThreshold {
  double threshold = 0.0;  // accept iff score >= threshold
  double achieved_krr = 0.0;
  bool saturated = false;  // |achieved - target| > 1/n
};

// Re-thresholds a "higher = known" score so the rejected fraction of knowns
// is closest to `target_krr`; ties resolve toward under-rejection.
MatchedThreshold matched_krr_threshold(std::span<const double> known_scores, double target_krr);

// Largest threshold that accepts at least `tpr` of the knowns.
double tpr_threshold(std::span<const double> known_scores, double tpr = 0.95);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t defined = 0;  // repeats in which the metric was defined
};

struct BootstrapOptions {
  std::optional<std::size_t> per_class;  // default: each class's own size
  std::size_t repeats = 1000;
  std::uint64_t seed = 0;
  std::vector<double> hc_thresholds = kDefaultHcThresholds;
};

struct BootstrapResult {
  std::size_t repeats = 0;
  std::size_t classes = 0;
  MeanStd fkar;
  std::map<double, MeanStd> hc_fkar;
};

// Resamples each unknown class with replacement against fixed acceptance
// flags. Repeat r draws from an mt19937_64 seeded with seed + r, visiting
// classes in sorted order. Records that are not unknown-test are ignored.
BootstrapResult bootstrap_stratified(std::span<const Record> records, const BootstrapOptions& options);

enum class TargetKind { Krr, KnownAcc };
const char* target_kind_name(TargetKind kind);

struct SweepInputs {
  std::string method;
  std::vector<double> calib_scores;       // known calibration samples, higher = known
  std::vector<std::int32_t> calib_labels;
  std::vector<std::int32_t> calib_candidates;
  std::vector<Record> test;               // `score` must be set
};

struct SweepRow {
  std::string method;
  TargetKind kind = TargetKind::Krr;
  double target = 0.0;
  double threshold = 0.0;
  double calib_value = 0.0;  // achieved target quantity on the calibration split
  double krr = 0.0;
  double known_acc = 0.0;
  double fkar = 0.0;
  std::optional<double> hc_fkar;  // at hc_threshold
  bool flagged = false;           // target not reachable within 1/n
};

// One calibrated row per target (targets must be sorted ascending).
std::vector<SweepRow> operating_curve_sweep(const SweepInputs& inputs, TargetKind kind,
                                            std::span<const double> targets,
                                            double hc_threshold = 0.90);
csv::Table sweep_table(std::span<const SweepRow> rows);

struct MethodRow {
  std::string table;  // "default" or "matched"
  std::string method;
  double threshold = 0.0;
  double known_acc = 0.0;
  double krr = 0.0;
  double fkar = 0.0;
  std::map<double, std::optional<double>> hc_fkar;
  std::optional<double> auroc;
  std::optional<double> fpr95;
  std::optional<double> far_ood_fkar;
};

struct EvalReport {
  std::vector<double> hc_thresholds = kDefaultHcThresholds;
  std::vector<MethodRow> rows;
  std::optional<BootstrapResult> bootstrap;  // for the headline method
  std::string bootstrap_method;

  const MethodRow* find(const std::string& table, const std::string& method) const;
};

// Fills every metric of a row from per-sample records.
MethodRow evaluate_method(const std::string& table, const std::string& method, double threshold,
                          std::span<const Record> records, std::span<const double> hc_thresholds);

std::string hc_column(double t);
csv::Table report_table(const EvalReport& report);
std::string report_json(const EvalReport& report);
csv::Table bootstrap_table(const BootstrapResult& result, const std::string& method);

}  // namespace egur::metrics
