#pragma once

#include <bitset>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egur/matrix.hpp"

namespace egur::local {

// Exact nearest-neighbor index over known training features, grouped by class.
struct ClassIndex {
  std::uint32_t num_classes = 0;
  std::uint32_t k = 5;   // support depth
  std::uint32_t m = 10;  // purity neighborhood size
  bool normalize = true;
  Matrix features;                   // pooled, in training order (normalized if flagged)
  std::vector<std::int32_t> labels;  // pooled labels
  std::vector<std::vector<std::size_t>> members;  // class -> rows of `features`
  Matrix prototypes;                 // class means, num_classes x d

  std::size_t dim() const { return features.cols(); }
  std::size_t class_size(std::int32_t c) const { return members.at(static_cast<std::size_t>(c)).size(); }
};

// Throws std::invalid_argument if any class in [0, num_classes) is empty or
// k / m are zero.
ClassIndex fit_class_index(const Matrix& features, std::span<const std::int32_t> labels,
                           std::uint32_t num_classes, std::uint32_t k, std::uint32_t m,
                           bool normalize);

// Applies the index's normalization to a query.
std::vector<double> prepare_query(const ClassIndex& index, std::span<const double> x);

struct SupportDistance {
  double distance = 0.0;
  std::uint32_t depth = 0;  // < k when the class has fewer than k members
};

// The measurement functions below take an already-prepared query.
SupportDistance support_distance(std::span<const double> x, std::int32_t c, const ClassIndex& index);
double contrast_ratio(std::span<const double> x, std::int32_t c, const ClassIndex& index);
double local_purity(std::span<const double> x, std::int32_t c, const ClassIndex& index);
double prototype_margin(std::span<const double> x, std::int32_t c, const ClassIndex& index);
double conflict_level(std::span<const double> x, std::int32_t c, const ClassIndex& index);

enum class Check : std::size_t { Support = 0, Contrast, Purity, Margin, Conflict };
inline constexpr std::size_t kNumChecks = 5;

class CheckMask {
 public:
  CheckMask() = default;
  static CheckMask standard();  // support, contrast, purity, margin
  static CheckMask parse(const std::string& spec);  // e.g. "sup,con,pur,mar"

  bool has(Check c) const { return bits_.test(static_cast<std::size_t>(c)); }
  CheckMask& set(Check c, bool on = true) {
    bits_.set(static_cast<std::size_t>(c), on);
    return *this;
  }
  bool empty() const { return bits_.none(); }
  std::string to_string() const;

  friend bool operator==(const CheckMask&, const CheckMask&) = default;

 private:
  std::bitset<kNumChecks> bits_;
};

const char* check_name(Check c);

struct EvidenceThresholds {
  std::vector<double> support;  // tau_sup(c), distance units
  std::vector<bool> support_degenerate;  // tau_sup(c) replaced after a zero quantile
  double pooled_support = 0.0;  // pooled leave-one-out quantile
  double contrast = 1.5;
  double purity = 0.5;
  double margin = 0.05;
  double conflict = 0.5;
  CheckMask mask = CheckMask::standard();
  bool global_support = false;  // use pooled_support for every class

  double support_for(std::int32_t c) const {
    return global_support ? pooled_support : support.at(static_cast<std::size_t>(c));
  }
};

struct SupportCalibration {
  double quantile = 0.95;
  bool global = false;
};

// Per-class nearest-rank quantile of leave-one-out k-th neighbor distances.
// Fills only the support part of the returned thresholds.
EvidenceThresholds calibrate_support_thresholds(const ClassIndex& index, SupportCalibration opts = {});

// Nearest-rank quantile: value at 1-based rank ceil(q * n), clamped to [1, n].
double nearest_rank_quantile(std::vector<double> values, double q);

struct Measurements {
  std::optional<double> support;   // d_sup
  std::optional<double> contrast;  // r_con, may be +inf
  std::optional<double> purity;    // p_loc
  std::optional<double> margin;    // m_proto, may be -inf
  std::optional<double> conflict;  // l_conf
  std::uint32_t support_depth = 0;
};

struct EvidenceVector {
  Measurements raw;
  std::optional<double> s_sup, s_con, s_pur, s_mar, s_conf;
  double r_local = 1.0;

  std::vector<double> active_strengths() const;
};

// Computes the measurements needed by the active checks for candidate c.
Measurements measure(std::span<const double> x, std::int32_t c, const ClassIndex& index,
                     const CheckMask& mask);

// Maps measurements to strengths in [0, 1] for the active checks and sets
// r_local. `c` selects tau_sup(c).
EvidenceVector evidence_strengths(const Measurements& raw, std::int32_t c,
                                  const EvidenceThresholds& thresholds);

// 1 - min over strengths. Throws std::invalid_argument on an empty set.
double local_risk(std::span<const double> strengths);

// Convenience: prepare + measure + strengths.
EvidenceVector evaluate(std::span<const double> raw_x, std::int32_t c, const ClassIndex& index,
                        const EvidenceThresholds& thresholds);

}  // namespace egur::local
