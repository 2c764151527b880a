#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "egur/error.hpp"
#include "egur/metrics.hpp"

namespace egur::metrics {

const char* target_kind_name(TargetKind kind) {
  return kind == TargetKind::Krr ? "krr" : "known_acc";
}

namespace {

struct Calibrated {
  double threshold = 0.0;
  double achieved = 0.0;
  bool flagged = false;
};

// Known accuracy on the calibration split falls as the threshold rises; pick
// the candidate closest to the target, preferring the lower threshold.
Calibrated calibrate_known_acc(const SweepInputs& in, double target) {
  const std::size_t n = in.calib_scores.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return in.calib_scores[a] < in.calib_scores[b]; });
  std::size_t correct_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (in.calib_candidates[i] == in.calib_labels[i]) ++correct_total;
  }

  Calibrated best;
  double best_gap = std::numeric_limits<double>::infinity();
  std::size_t correct_below = 0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t i = order[pos];
    const bool fresh = pos == 0 || in.calib_scores[order[pos - 1]] != in.calib_scores[i];
    if (fresh) {
      const double acc = static_cast<double>(correct_total - correct_below) / static_cast<double>(n);
      const double gap = std::abs(acc - target);
      if (gap < best_gap) {
        best_gap = gap;
        best.threshold = in.calib_scores[i];
        best.achieved = acc;
      }
    }
    if (in.calib_candidates[i] == in.calib_labels[i]) ++correct_below;
  }
  if (std::abs(target) < best_gap) {
    best_gap = std::abs(target);
    best.threshold = std::nextafter(in.calib_scores[order.back()], std::numeric_limits<double>::infinity());
    best.achieved = 0.0;
  }
  best.flagged = best_gap > 1.0 / static_cast<double>(n) + 1e-12;
  return best;
}

}  // namespace

std::vector<SweepRow> operating_curve_sweep(const SweepInputs& inputs, TargetKind kind,
                                            std::span<const double> targets, double hc_threshold) {
  const std::size_t n = inputs.calib_scores.size();
  if (n == 0) throw std::invalid_argument("empty calibration scores");
  if (kind == TargetKind::KnownAcc &&
      (inputs.calib_labels.size() != n || inputs.calib_candidates.size() != n)) {
    throw std::invalid_argument("calibration labels and candidates must match the scores");
  }
  if (!std::is_sorted(targets.begin(), targets.end())) throw std::invalid_argument("targets must be sorted");
  for (const auto& r : inputs.test) {
    if (!r.score) throw std::invalid_argument("sweep records need scores");
  }

  std::vector<SweepRow> rows;
  std::vector<Record> test = inputs.test;
  for (double target : targets) {
    SweepRow row;
    row.method = inputs.method;
    row.kind = kind;
    row.target = target;
    if (kind == TargetKind::Krr) {
      if (target >= 1.0 || target < 0.0) {
        row.flagged = true;
        row.threshold = std::numeric_limits<double>::infinity();
        row.calib_value = 1.0;
      } else {
        const MatchedThreshold mt = matched_krr_threshold(inputs.calib_scores, target);
        row.threshold = mt.threshold;
        row.calib_value = mt.achieved_krr;
        row.flagged = mt.saturated;
      }
    } else {
      const Calibrated c = calibrate_known_acc(inputs, target);
      row.threshold = c.threshold;
      row.calib_value = c.achieved;
      row.flagged = c.flagged;
    }
    for (auto& r : test) r.accepted = *r.score >= row.threshold;
    const CoreRates rates = core_rates(test);
    row.krr = rates.krr;
    row.known_acc = rates.known_acc;
    row.fkar = rates.fkar;
    row.hc_fkar = hc_fkar_at(test, hc_threshold);
    rows.push_back(row);
  }
  return rows;
}

csv::Table sweep_table(std::span<const SweepRow> rows) {
  csv::Table table;
  table.header = {"method", "target_kind", "target", "threshold", "calib_value", "krr",
                  "known_acc", "fkar", "hc_fkar", "flagged"};
  for (const auto& row : rows) {
    table.rows.push_back({row.method, target_kind_name(row.kind), csv::format_number(row.target),
                          csv::format_number(row.threshold), csv::format_number(row.calib_value),
                          csv::format_number(row.krr), csv::format_number(row.known_acc),
                          csv::format_number(row.fkar), csv::format_optional(row.hc_fkar),
                          row.flagged ? "1" : "0"});
  }
  return table;
}

}  // namespace egur::metrics
