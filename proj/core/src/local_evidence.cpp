#include "egur/local_evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace egur::local {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> distances_to_all(std::span<const double> x, const ClassIndex& index) {
  if (x.size() != index.dim()) throw std::invalid_argument("query dimension mismatch");
  std::vector<double> d(index.features.rows());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = euclidean_distance(x, index.features.row(i));
  return d;
}

void check_class(std::int32_t c, const ClassIndex& index) {
  if (c < 0 || static_cast<std::uint32_t>(c) >= index.num_classes) {
    throw std::invalid_argument("candidate class not in index");
  }
}

SupportDistance kth_in_class(const std::vector<double>& dists, std::int32_t c,
                             const ClassIndex& index) {
  const auto& rows = index.members[static_cast<std::size_t>(c)];
  std::vector<double> own;
  own.reserve(rows.size());
  for (std::size_t r : rows) own.push_back(dists[r]);
  const std::size_t depth = std::min<std::size_t>(index.k, own.size());
  std::nth_element(own.begin(), own.begin() + static_cast<std::ptrdiff_t>(depth - 1), own.end());
  return {own[depth - 1], static_cast<std::uint32_t>(depth)};
}

double contrast_from(const std::vector<double>& dists, std::int32_t c, const ClassIndex& index) {
  if (index.num_classes < 2) throw std::invalid_argument("contrast needs at least two classes");
  const double own = kth_in_class(dists, c, index).distance;
  double best = kInf;
  for (std::uint32_t other = 0; other < index.num_classes; ++other) {
    if (static_cast<std::int32_t>(other) == c) continue;
    best = std::min(best, kth_in_class(dists, static_cast<std::int32_t>(other), index).distance);
  }
  if (best == 0.0) return kInf;
  return own / best;
}

// Rows of the m nearest pooled neighbors, ordered by (distance, row).
std::vector<std::size_t> top_m(const std::vector<double>& dists, std::uint32_t m) {
  if (dists.size() < m) throw std::invalid_argument("index smaller than purity neighborhood m");
  std::vector<std::size_t> order(dists.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto by_distance = [&](std::size_t a, std::size_t b) {
    return dists[a] < dists[b] || (dists[a] == dists[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + m, order.end(), by_distance);
  order.resize(m);
  return order;
}

double purity_from(const std::vector<double>& dists, std::int32_t c, const ClassIndex& index) {
  const auto nn = top_m(dists, index.m);
  std::size_t hits = 0;
  for (std::size_t r : nn) hits += index.labels[r] == c;
  return static_cast<double>(hits) / static_cast<double>(index.m);
}

std::int32_t majority_label(const std::vector<double>& dists, const ClassIndex& index) {
  const auto nn = top_m(dists, index.m);
  std::vector<std::size_t> votes(index.num_classes, 0);
  for (std::size_t r : nn) ++votes[static_cast<std::size_t>(index.labels[r])];
  return static_cast<std::int32_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

std::vector<double> prototype_distances(std::span<const double> x, const ClassIndex& index) {
  std::vector<double> d(index.num_classes);
  for (std::uint32_t c = 0; c < index.num_classes; ++c) {
    d[c] = euclidean_distance(x, index.prototypes.row(c));
  }
  return d;
}

double margin_from(const std::vector<double>& proto, std::int32_t c) {
  if (proto.size() < 2) throw std::invalid_argument("margin needs at least two classes");
  double competitor = kInf;
  for (std::size_t other = 0; other < proto.size(); ++other) {
    if (static_cast<std::int32_t>(other) != c) competitor = std::min(competitor, proto[other]);
  }
  if (competitor == 0.0) return -kInf;
  return (competitor - proto[static_cast<std::size_t>(c)]) / competitor;
}

double conflict_from(const std::vector<double>& dists, const std::vector<double>& proto,
                     std::int32_t c, const ClassIndex& index) {
  const auto nearest_proto =
      static_cast<std::int32_t>(std::min_element(proto.begin(), proto.end()) - proto.begin());
  const auto majority = majority_label(dists, index);
  return 0.5 * static_cast<double>((nearest_proto != c) + (majority != c));
}

}  // namespace

ClassIndex fit_class_index(const Matrix& features, std::span<const std::int32_t> labels,
                           std::uint32_t num_classes, std::uint32_t k, std::uint32_t m,
                           bool normalize) {
  if (k == 0 || m == 0) throw std::invalid_argument("k and m must be >= 1");
  if (features.rows() != labels.size()) throw std::invalid_argument("label count mismatch");
  ClassIndex index;
  index.num_classes = num_classes;
  index.k = k;
  index.m = m;
  index.normalize = normalize;
  index.features = features;
  index.labels.assign(labels.begin(), labels.end());
  index.members.assign(num_classes, {});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = labels[i];
    if (y < 0 || static_cast<std::uint32_t>(y) >= num_classes) {
      throw std::invalid_argument("index labels must be known classes");
    }
    index.members[static_cast<std::size_t>(y)].push_back(i);
    if (normalize) l2_normalize(index.features.row(i));
  }
  index.prototypes = Matrix(num_classes, features.cols());
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    const auto& rows = index.members[c];
    if (rows.empty()) throw std::invalid_argument("empty class " + std::to_string(c));
    auto mu = index.prototypes.row(c);
    for (std::size_t r : rows) {
      const auto f = index.features.row(r);
      for (std::size_t j = 0; j < mu.size(); ++j) mu[j] += f[j];
    }
    for (double& v : mu) v /= static_cast<double>(rows.size());
  }
  return index;
}

std::vector<double> prepare_query(const ClassIndex& index, std::span<const double> x) {
  std::vector<double> q(x.begin(), x.end());
  if (index.normalize) l2_normalize(q);
  return q;
}

SupportDistance support_distance(std::span<const double> x, std::int32_t c, const ClassIndex& index) {
  check_class(c, index);
  return kth_in_class(distances_to_all(x, index), c, index);
}

double contrast_ratio(std::span<const double> x, std::int32_t c, const ClassIndex& index) {
  check_class(c, index);
  return contrast_from(distances_to_all(x, index), c, index);
}

double local_purity(std::span<const double> x, std::int32_t c, const ClassIndex& index) {
  check_class(c, index);
  return purity_from(distances_to_all(x, index), c, index);
}

double prototype_margin(std::span<const double> x, std::int32_t c, const ClassIndex& index) {
  check_class(c, index);
  return margin_from(prototype_distances(x, index), c);
}

double conflict_level(std::span<const double> x, std::int32_t c, const ClassIndex& index) {
  check_class(c, index);
  return conflict_from(distances_to_all(x, index), prototype_distances(x, index), c, index);
}

// ---------------------------------------------------------------------------

CheckMask CheckMask::standard() {
  CheckMask mask;
  return mask.set(Check::Support).set(Check::Contrast).set(Check::Purity).set(Check::Margin);
}

const char* check_name(Check c) {
  switch (c) {
    case Check::Support: return "sup";
    case Check::Contrast: return "con";
    case Check::Purity: return "pur";
    case Check::Margin: return "mar";
    case Check::Conflict: return "conf";
  }
  return "?";
}

CheckMask CheckMask::parse(const std::string& spec) {
  CheckMask mask;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    bool found = false;
    for (std::size_t i = 0; i < kNumChecks; ++i) {
      if (token == check_name(static_cast<Check>(i))) {
        mask.set(static_cast<Check>(i));
        found = true;
      }
    }
    if (!found) throw std::invalid_argument("unknown evidence check: " + token);
  }
  if (mask.empty()) throw std::invalid_argument("check mask must enable at least one check");
  return mask;
}

std::string CheckMask::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < kNumChecks; ++i) {
    if (!bits_.test(i)) continue;
    if (!out.empty()) out += ',';
    out += check_name(static_cast<Check>(i));
  }
  return out;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

EvidenceThresholds calibrate_support_thresholds(const ClassIndex& index, SupportCalibration opts) {
  const std::size_t classes = index.num_classes;
  std::vector<std::vector<double>> loo(classes);
  std::vector<double> pooled;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& rows = index.members[c];
    if (rows.size() < static_cast<std::size_t>(index.k) + 1) continue;
    for (std::size_t a : rows) {
      std::vector<double> d;
      d.reserve(rows.size() - 1);
      for (std::size_t b : rows) {
        if (a != b) d.push_back(euclidean_distance(index.features.row(a), index.features.row(b)));
      }
      std::nth_element(d.begin(), d.begin() + (index.k - 1), d.end());
      loo[c].push_back(d[index.k - 1]);
    }
    pooled.insert(pooled.end(), loo[c].begin(), loo[c].end());
  }
  if (pooled.empty()) {
    // No class is large enough at depth k; pool nearest-neighbor distances.
    for (std::size_t c = 0; c < classes; ++c) {
      const auto& rows = index.members[c];
      for (std::size_t a : rows) {
        double best = kInf;
        for (std::size_t b : rows) {
          if (a != b) best = std::min(best, euclidean_distance(index.features.row(a), index.features.row(b)));
        }
        if (std::isfinite(best)) pooled.push_back(best);
      }
    }
  }
  if (pooled.empty()) throw std::invalid_argument("support calibration needs a class with >= 2 samples");

  double smallest_positive = kInf;
  for (double v : pooled) {
    if (v > 0.0) smallest_positive = std::min(smallest_positive, v);
  }
  if (!std::isfinite(smallest_positive)) smallest_positive = 1.0;

  EvidenceThresholds t;
  t.global_support = opts.global;
  t.pooled_support = nearest_rank_quantile(pooled, opts.quantile);
  if (t.pooled_support <= 0.0) t.pooled_support = smallest_positive;
  t.support.resize(classes);
  t.support_degenerate.assign(classes, false);
  for (std::size_t c = 0; c < classes; ++c) {
    double tau = loo[c].empty() ? t.pooled_support : nearest_rank_quantile(loo[c], opts.quantile);
    if (tau <= 0.0) {
      tau = smallest_positive;
      t.support_degenerate[c] = true;
    }
    t.support[c] = tau;
  }
  return t;
}

Measurements measure(std::span<const double> x, std::int32_t c, const ClassIndex& index,
                     const CheckMask& mask) {
  check_class(c, index);
  Measurements out;
  const bool need_dists = mask.has(Check::Support) || mask.has(Check::Contrast) ||
                          mask.has(Check::Purity) || mask.has(Check::Conflict);
  const bool need_proto = mask.has(Check::Margin) || mask.has(Check::Conflict);
  std::vector<double> dists;
  std::vector<double> proto;
  if (need_dists) dists = distances_to_all(x, index);
  if (need_proto) proto = prototype_distances(x, index);

  if (mask.has(Check::Support)) {
    const auto s = kth_in_class(dists, c, index);
    out.support = s.distance;
    out.support_depth = s.depth;
  }
  if (mask.has(Check::Contrast)) out.contrast = contrast_from(dists, c, index);
  if (mask.has(Check::Purity)) out.purity = purity_from(dists, c, index);
  if (mask.has(Check::Margin)) out.margin = margin_from(proto, c);
  if (mask.has(Check::Conflict)) out.conflict = conflict_from(dists, proto, c, index);
  return out;
}

std::vector<double> EvidenceVector::active_strengths() const {
  std::vector<double> s;
  for (const auto& v : {s_sup, s_con, s_pur, s_mar, s_conf}) {
    if (v) s.push_back(*v);
  }
  return s;
}

EvidenceVector evidence_strengths(const Measurements& raw, std::int32_t c,
                                  const EvidenceThresholds& t) {
  EvidenceVector ev;
  ev.raw = raw;
  const auto& mask = t.mask;
  if (mask.has(Check::Support) && raw.support) {
    ev.s_sup = clamp01(1.0 - *raw.support / t.support_for(c));
  }
  if (mask.has(Check::Contrast) && raw.contrast) {
    ev.s_con = clamp01((t.contrast - *raw.contrast) / t.contrast);
  }
  if (mask.has(Check::Purity) && raw.purity) {
    ev.s_pur = clamp01((*raw.purity - t.purity) / (1.0 - t.purity));
  }
  if (mask.has(Check::Margin) && raw.margin) {
    ev.s_mar = clamp01(*raw.margin - t.margin);
  }
  if (mask.has(Check::Conflict) && raw.conflict) {
    ev.s_conf = clamp01((t.conflict - *raw.conflict) / t.conflict);
  }
  ev.r_local = local_risk(ev.active_strengths());
  return ev;
}

double local_risk(std::span<const double> strengths) {
  if (strengths.empty()) throw std::invalid_argument("local risk needs at least one active strength");
  return 1.0 - *std::min_element(strengths.begin(), strengths.end());
}

EvidenceVector evaluate(std::span<const double> raw_x, std::int32_t c, const ClassIndex& index,
                        const EvidenceThresholds& thresholds) {
  const auto q = prepare_query(index, raw_x);
  return evidence_strengths(measure(q, c, index, thresholds.mask), c, thresholds);
}

}  // namespace egur::local
