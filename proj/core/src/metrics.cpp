#include "egur/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "json.hpp"

#include "egur/error.hpp"

namespace egur::metrics {

const char* role_name(Role role) {
  switch (role) {
    case Role::KnownTest: return "known_test";
    case Role::UnknownTest: return "unknown_test";
    case Role::FarOod: return "far_ood";
  }
  return "?";
}

CoreRates core_rates(std::span<const Record> records) {
  std::size_t known = 0, correct = 0, rejected = 0, unknown = 0, false_accept = 0;
  for (const auto& r : records) {
    if (r.role == Role::KnownTest) {
      ++known;
      if (!r.accepted) ++rejected;
      else if (r.candidate == r.label) ++correct;
    } else if (r.role == Role::UnknownTest) {
      ++unknown;
      if (r.accepted) ++false_accept;
    }
  }
  if (known == 0 || unknown == 0) throw std::invalid_argument("empty split");
  CoreRates out;
  out.known_acc = static_cast<double>(correct) / static_cast<double>(known);
  out.krr = static_cast<double>(rejected) / static_cast<double>(known);
  out.fkar = static_cast<double>(false_accept) / static_cast<double>(unknown);
  return out;
}

std::optional<double> acceptance_rate(std::span<const Record> records, Role role) {
  std::size_t total = 0, accepted = 0;
  for (const auto& r : records) {
    if (r.role != role) continue;
    ++total;
    if (r.accepted) ++accepted;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(accepted) / static_cast<double>(total);
}

std::optional<double> hc_fkar_at(std::span<const Record> records, double t) {
  std::size_t denom = 0, numer = 0;
  for (const auto& r : records) {
    if (r.role != Role::UnknownTest || r.confidence < t) continue;
    ++denom;
    if (r.accepted) ++numer;
  }
  if (denom == 0) return std::nullopt;
  return static_cast<double>(numer) / static_cast<double>(denom);
}

double auroc(std::span<const double> known, std::span<const double> unknown) {
  if (known.empty() || unknown.empty()) throw std::invalid_argument("empty set");
  std::vector<double> sorted(unknown.begin(), unknown.end());
  std::sort(sorted.begin(), sorted.end());
  double wins = 0.0;
  for (double s : known) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), s);
    const auto hi = std::upper_bound(lo, sorted.end(), s);
    wins += static_cast<double>(lo - sorted.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(known.size()) * static_cast<double>(unknown.size()));
}

double tpr_threshold(std::span<const double> known_scores, double tpr) {
  if (known_scores.empty()) throw std::invalid_argument("empty set");
  if (!(tpr > 0.0 && tpr <= 1.0)) throw std::invalid_argument("tpr must lie in (0, 1]");
  std::vector<double> desc(known_scores.begin(), known_scores.end());
  std::sort(desc.begin(), desc.end(), std::greater<>());
  const double n = static_cast<double>(desc.size());
  auto need = static_cast<std::size_t>(std::ceil(tpr * n - 1e-12));
  need = std::clamp<std::size_t>(need, 1, desc.size());
  return desc[need - 1];
}

double fpr_at_tpr(std::span<const double> known, std::span<const double> unknown, double tpr) {
  if (unknown.empty()) throw std::invalid_argument("empty set");
  const double threshold = tpr_threshold(known, tpr);
  const auto above = std::count_if(unknown.begin(), unknown.end(),
                                   [&](double s) { return s >= threshold; });
  return static_cast<double>(above) / static_cast<double>(unknown.size());
}

MatchedThreshold matched_krr_threshold(std::span<const double> known_scores, double target_krr) {
  if (known_scores.empty()) throw std::invalid_argument("empty set");
  if (!(target_krr >= 0.0 && target_krr < 1.0)) throw std::invalid_argument("target KRR must lie in [0, 1)");
  std::vector<double> asc(known_scores.begin(), known_scores.end());
  std::sort(asc.begin(), asc.end());
  const double n = static_cast<double>(asc.size());

  MatchedThreshold best;
  double best_gap = std::numeric_limits<double>::infinity();
  // Candidate thresholds in ascending order, so rejection grows; strict `<`
  // keeps the smaller rejection on equal gaps.
  for (std::size_t i = 0; i < asc.size(); ++i) {
    if (i > 0 && asc[i] == asc[i - 1]) continue;
    const double rejected = static_cast<double>(i) / n;
    const double gap = std::abs(rejected - target_krr);
    if (gap < best_gap) {
      best_gap = gap;
      best.threshold = asc[i];
      best.achieved_krr = rejected;
    }
  }
  if (std::abs(1.0 - target_krr) < best_gap) {
    best_gap = std::abs(1.0 - target_krr);
    best.threshold = std::nextafter(asc.back(), std::numeric_limits<double>::infinity());
    best.achieved_krr = 1.0;
  }
  best.saturated = best_gap > 1.0 / n + 1e-12;
  if (best.saturated) {
    warn("matched KRR saturated by ties: target " + csv::format_number(target_krr) + ", achieved " +
         csv::format_number(best.achieved_krr));
  }
  return best;
}

MethodRow evaluate_method(const std::string& table, const std::string& method, double threshold,
                          std::span<const Record> records, std::span<const double> hc_thresholds) {
  MethodRow row;
  row.table = table;
  row.method = method;
  row.threshold = threshold;
  const CoreRates rates = core_rates(records);
  row.known_acc = rates.known_acc;
  row.krr = rates.krr;
  row.fkar = rates.fkar;
  for (double t : hc_thresholds) row.hc_fkar[t] = hc_fkar_at(records, t);

  std::vector<double> known, unknown;
  bool scored = true;
  for (const auto& r : records) {
    if (r.role == Role::FarOod) continue;
    if (!r.score) {
      scored = false;
      break;
    }
    (r.role == Role::KnownTest ? known : unknown).push_back(*r.score);
  }
  if (scored) {
    row.auroc = auroc(known, unknown);
    row.fpr95 = fpr_at_tpr(known, unknown, 0.95);
  }
  row.far_ood_fkar = acceptance_rate(records, Role::FarOod);
  return row;
}

const MethodRow* EvalReport::find(const std::string& table, const std::string& method) const {
  for (const auto& row : rows) {
    if (row.table == table && row.method == method) return &row;
  }
  return nullptr;
}

std::string hc_column(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "hc_fkar@%.2f", t);
  return buf;
}

csv::Table report_table(const EvalReport& report) {
  csv::Table table;
  table.header = {"table", "method", "threshold", "known_acc", "krr", "fkar"};
  for (double t : report.hc_thresholds) table.header.push_back(hc_column(t));
  for (const char* col : {"auroc", "fpr95", "far_ood_fkar"}) table.header.emplace_back(col);
  for (const auto& row : report.rows) {
    std::vector<std::string> cells = {row.table, row.method, csv::format_number(row.threshold),
                                      csv::format_number(row.known_acc), csv::format_number(row.krr),
                                      csv::format_number(row.fkar)};
    for (double t : report.hc_thresholds) {
      const auto it = row.hc_fkar.find(t);
      cells.push_back(it == row.hc_fkar.end() ? "n/a" : csv::format_optional(it->second));
    }
    cells.push_back(csv::format_optional(row.auroc));
    cells.push_back(csv::format_optional(row.fpr95));
    cells.push_back(csv::format_optional(row.far_ood_fkar));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json mean_std_json(const MeanStd& ms) {
  return {{"mean", ms.mean}, {"std", ms.std}, {"defined", ms.defined}};
}

}  // namespace

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["hc_thresholds"] = report.hc_thresholds;
  auto tables = nlohmann::ordered_json::object();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json r;
    r["threshold"] = row.threshold;
    r["known_acc"] = row.known_acc;
    r["krr"] = row.krr;
    r["fkar"] = row.fkar;
    auto hc = nlohmann::ordered_json::object();
    for (const auto& [t, v] : row.hc_fkar) hc[hc_column(t).substr(8)] = optional_json(v);
    r["hc_fkar"] = hc;
    r["auroc"] = optional_json(row.auroc);
    r["fpr95"] = optional_json(row.fpr95);
    r["far_ood_fkar"] = optional_json(row.far_ood_fkar);
    tables[row.table][row.method] = r;
  }
  j["tables"] = tables;
  if (report.bootstrap) {
    nlohmann::ordered_json b;
    b["method"] = report.bootstrap_method;
    b["repeats"] = report.bootstrap->repeats;
    b["classes"] = report.bootstrap->classes;
    b["fkar"] = mean_std_json(report.bootstrap->fkar);
    auto hc = nlohmann::ordered_json::object();
    for (const auto& [t, ms] : report.bootstrap->hc_fkar) hc[hc_column(t).substr(8)] = mean_std_json(ms);
    b["hc_fkar"] = hc;
    j["bootstrap"] = b;
  }
  return j.dump(2) + "\n";
}

}  // namespace egur::metrics
