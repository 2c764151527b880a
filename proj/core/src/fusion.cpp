#include "egur/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "egur/error.hpp"

namespace egur::fusion {

double fuse_risk(double r_local, double r_res, double alpha) {
  return alpha * r_local + (1.0 - alpha) * r_res;
}

OperatingPoint calibrate_threshold(std::span<const double> risks, double target_krr) {
  if (!(target_krr >= 0.0 && target_krr < 1.0)) {
    throw std::invalid_argument("target KRR must lie in [0, 1)");
  }
  if (risks.empty()) throw std::invalid_argument("threshold calibration needs at least one risk");

  std::vector<double> sorted(risks.begin(), risks.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  // Scanned from the largest threshold down, so on equal distance the less
  // rejecting candidate is kept.
  OperatingPoint best;
  best.target_krr = target_krr;
  best.n_calib = n;
  double best_gap = std::numeric_limits<double>::infinity();

  auto consider = [&](double tau, std::size_t rejected) {
    const double krr = static_cast<double>(rejected) * inv_n;
    const double gap = std::abs(krr - target_krr);
    if (gap < best_gap) {
      best_gap = gap;
      best.threshold = tau;
      best.achieved_krr = krr;
    }
  };

  // Distinct values from largest to smallest; rejected = count(r > tau).
  std::size_t i = n;
  while (i > 0) {
    const double tau = sorted[i - 1];
    std::size_t first = i - 1;
    while (first > 0 && sorted[first - 1] == tau) --first;
    consider(tau, n - i);
    i = first;
  }
  const double below = std::nextafter(sorted.front(), -std::numeric_limits<double>::infinity());
  if (below >= 0.0) consider(below, n);

  best.saturated = best_gap > inv_n + 1e-12;
  if (best.saturated) {
    warn("threshold calibration: target KRR " + std::to_string(target_krr) +
         " unreachable within 1/n; achieved " + std::to_string(best.achieved_krr));
  }
  return best;
}

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::ResidualEndpoint: return "residual-endpoint";
    case Branch::KnownAccuracy: return "known-acc";
    case Branch::Override: return "override";
  }
  return "?";
}

std::optional<Branch> parse_branch(const std::string& name) {
  for (Branch b : {Branch::ResidualEndpoint, Branch::KnownAccuracy, Branch::Override}) {
    if (name == branch_name(b)) return b;
  }
  return std::nullopt;
}

double coefficient_of_variation(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("degenerate risk distribution");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (!(mean > 0.0)) throw std::invalid_argument("degenerate risk distribution");
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return std::sqrt(var) / mean;
}

namespace {

std::size_t grid_index(double alpha) {
  for (std::size_t i = 0; i < kAlphaGrid.size(); ++i) {
    if (std::abs(kAlphaGrid[i] - alpha) < 1e-9) return i;
  }
  throw std::invalid_argument("alpha_KA must be a grid value");
}

}  // namespace

EvidenceWeightSelection apply_alpha_rule(double cv_local, double cv_res,
                                         std::optional<double> alpha_ka) {
  EvidenceWeightSelection s;
  s.cv_local = cv_local;
  s.cv_res = cv_res;
  s.alpha_ka = alpha_ka;
  if (cv_res < cv_local) {
    s.branch = Branch::ResidualEndpoint;
    s.alpha = kAlphaGrid.front();
    return s;
  }
  if (!alpha_ka) throw std::invalid_argument("known-accuracy branch requires alpha_KA");
  s.branch = Branch::KnownAccuracy;
  const std::size_t ka = grid_index(*alpha_ka);
  s.alpha = kAlphaGrid[ka == 0 ? 0 : ka - 1];
  return s;
}

std::size_t known_accuracy_grid(std::span<const double> r_local, std::span<const double> r_res,
                                std::span<const std::int32_t> candidates,
                                std::span<const std::int32_t> labels, double target_krr,
                                std::vector<double>* known_acc) {
  const std::size_t n = r_local.size();
  if (r_res.size() != n || candidates.size() != n || labels.size() != n) {
    throw std::invalid_argument("calibration vectors differ in length");
  }
  std::vector<double> acc(kAlphaGrid.size());
  std::vector<double> fused(n);
  for (std::size_t g = 0; g < kAlphaGrid.size(); ++g) {
    for (std::size_t i = 0; i < n; ++i) fused[i] = fuse_risk(r_local[i], r_res[i], kAlphaGrid[g]);
    const auto op = calibrate_threshold(fused, target_krr);
    std::size_t good = 0;
    for (std::size_t i = 0; i < n; ++i) good += fused[i] <= op.threshold && candidates[i] == labels[i];
    acc[g] = static_cast<double>(good) / static_cast<double>(n);
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < acc.size(); ++g) {
    if (acc[g] >= acc[best]) best = g;
  }
  if (known_acc) *known_acc = acc;
  return best;
}

EvidenceWeightSelection select_alpha(std::span<const double> r_local, std::span<const double> r_res,
                                     std::span<const std::int32_t> candidates,
                                     std::span<const std::int32_t> labels, double target_krr) {
  const double cv_local = coefficient_of_variation(r_local);
  const double cv_res = coefficient_of_variation(r_res);
  std::vector<double> acc;
  const std::size_t ka = known_accuracy_grid(r_local, r_res, candidates, labels, target_krr, &acc);
  auto s = apply_alpha_rule(cv_local, cv_res, kAlphaGrid[ka]);
  s.grid_known_acc = std::move(acc);
  return s;
}

const char* state_name(State s) {
  switch (s) {
    case State::AcceptedKnown: return "accepted-known";
    case State::UnsupportedKnownLike: return "unsupported-known-like";
    case State::OodUnknown: return "ood-unknown";
  }
  return "?";
}

Decision decide(std::int32_t candidate, double confidence, double r_local, double r_res,
                double alpha, double tau_a, double t_hc) {
  Decision d;
  d.candidate = candidate;
  d.confidence = confidence;
  d.r_local = r_local;
  d.r_res = r_res;
  d.r_a = fuse_risk(r_local, r_res, alpha);
  if (d.r_a <= tau_a) {
    d.state = State::AcceptedKnown;
  } else if (confidence >= t_hc) {
    d.state = State::UnsupportedKnownLike;
  } else {
    d.state = State::OodUnknown;
  }
  return d;
}

}  // namespace egur::fusion
