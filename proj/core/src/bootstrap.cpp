#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "egur/metrics.hpp"

namespace egur::metrics {

namespace {

MeanStd summarize(const std::vector<double>& values) {
  MeanStd out;
  out.defined = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

}  // namespace

BootstrapResult bootstrap_stratified(std::span<const Record> records, const BootstrapOptions& options) {
  if (options.repeats == 0) throw std::invalid_argument("repeats must be >= 1");
  if (options.per_class && *options.per_class == 0) throw std::invalid_argument("resample size must be >= 1");

  std::map<std::string, std::vector<const Record*>> classes;
  for (const auto& r : records) {
    if (r.role != Role::UnknownTest) continue;
    if (r.unknown_class.empty()) throw std::invalid_argument("unknown record without class id");
    classes[r.unknown_class].push_back(&r);
  }
  if (classes.empty()) throw std::invalid_argument("class with zero records");

  const auto& ts = options.hc_thresholds;
  std::vector<double> fkar;
  std::vector<std::vector<double>> hc(ts.size());
  fkar.reserve(options.repeats);

  for (std::size_t rep = 0; rep < options.repeats; ++rep) {
    std::mt19937_64 rng(options.seed + rep);
    std::size_t total = 0, accepted = 0;
    std::vector<std::size_t> denom(ts.size(), 0), numer(ts.size(), 0);
    for (const auto& [id, members] : classes) {
      const std::size_t draws = options.per_class.value_or(members.size());
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      for (std::size_t d = 0; d < draws; ++d) {
        const Record& r = *members[pick(rng)];
        ++total;
        if (r.accepted) ++accepted;
        for (std::size_t i = 0; i < ts.size(); ++i) {
          if (r.confidence >= ts[i]) {
            ++denom[i];
            if (r.accepted) ++numer[i];
          }
        }
      }
    }
    fkar.push_back(static_cast<double>(accepted) / static_cast<double>(total));
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (denom[i] > 0) hc[i].push_back(static_cast<double>(numer[i]) / static_cast<double>(denom[i]));
    }
  }

  BootstrapResult out;
  out.repeats = options.repeats;
  out.classes = classes.size();
  out.fkar = summarize(fkar);
  for (std::size_t i = 0; i < ts.size(); ++i) out.hc_fkar[ts[i]] = summarize(hc[i]);
  return out;
}

csv::Table bootstrap_table(const BootstrapResult& result, const std::string& method) {
  csv::Table table;
  table.header = {"method", "metric", "mean", "std", "defined", "repeats", "classes"};
  auto add = [&](const std::string& metric, const MeanStd& ms) {
    const bool any = ms.defined > 0;
    table.rows.push_back({method, metric, any ? csv::format_number(ms.mean) : "n/a",
                          any ? csv::format_number(ms.std) : "n/a", std::to_string(ms.defined),
                          std::to_string(result.repeats), std::to_string(result.classes)});
  };
  add("fkar", result.fkar);
  for (const auto& [t, ms] : result.hc_fkar) add(hc_column(t), ms);
  return table;
}

}  // namespace egur::metrics
