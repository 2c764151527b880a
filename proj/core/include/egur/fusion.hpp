#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace egur::fusion {

// Evidence-weight grid. Selection works on grid indices so the one-step
// correction never accumulates floating-point drift.
inline constexpr std::array<double, 5> kAlphaGrid = {0.2, 0.4, 0.6, 0.8, 1.0};

// r_A = alpha * r_local + (1 - alpha) * r_res
double fuse_risk(double r_local, double r_res, double alpha);

struct OperatingPoint {
  double target_krr = 0.0;
  double threshold = 1.0;     // tau_A; accept iff r_A <= tau_A
  double achieved_krr = 0.0;  // on the calibration risks
  std::size_t n_calib = 0;
  bool saturated = false;     // |achieved - target| > 1/n (heavy ties)
};

// Picks tau_A among the observed risks (plus a reject-all point just below the
// minimum when that is still >= 0) so the fraction with r_A > tau_A is closest
// to the target; equal distances resolve toward under-rejection.
OperatingPoint calibrate_threshold(std::span<const double> risks, double target_krr);

enum class Branch { ResidualEndpoint, KnownAccuracy, Override };
const char* branch_name(Branch b);
std::optional<Branch> parse_branch(const std::string& name);

struct EvidenceWeightSelection {
  double cv_local = 0.0;
  double cv_res = 0.0;
  Branch branch = Branch::KnownAccuracy;
  std::optional<double> alpha_ka;
  double alpha = 1.0;
  // Known accuracy on the calibration split for each grid alpha (same order
  // as kAlphaGrid); empty when the grid search was not run.
  std::vector<double> grid_known_acc;
};

// Population std / mean. Throws std::invalid_argument("degenerate risk
// distribution") when the mean is not positive.
double coefficient_of_variation(std::span<const double> values);

// The selection rule applied to precomputed statistics:
//   cv_res < cv_local  -> alpha = 0.2 (residual endpoint)
//   otherwise          -> alpha = max(alpha_ka - 0.2, 0.2)
// alpha_ka must be a grid value when the known-accuracy branch applies.
EvidenceWeightSelection apply_alpha_rule(double cv_local, double cv_res,
                                         std::optional<double> alpha_ka);

// Grid search for the known-accuracy-maximizing alpha: for every grid alpha,
// calibrate tau_A to target_krr on these samples and count samples that are
// both correctly classified and accepted. Ties go to the larger alpha.
// Returns the grid index and fills the per-alpha accuracies.
std::size_t known_accuracy_grid(std::span<const double> r_local, std::span<const double> r_res,
                                std::span<const std::int32_t> candidates,
                                std::span<const std::int32_t> labels, double target_krr,
                                std::vector<double>* known_acc);

// Full unknown-free selection on known calibration samples.
EvidenceWeightSelection select_alpha(std::span<const double> r_local, std::span<const double> r_res,
                                     std::span<const std::int32_t> candidates,
                                     std::span<const std::int32_t> labels, double target_krr);

enum class State { AcceptedKnown, UnsupportedKnownLike, OodUnknown };
const char* state_name(State s);

struct Decision {
  std::int32_t candidate = 0;
  double confidence = 0.0;
  double r_local = 0.0;
  double r_res = 0.0;
  double r_a = 0.0;
  State state = State::OodUnknown;
};

// accepted-known iff r_A <= tau_A; rejected samples with q >= t_hc are
// unsupported-known-like, the rest ood-unknown.
Decision decide(std::int32_t candidate, double confidence, double r_local, double r_res,
                double alpha, double tau_a, double t_hc = 0.90);

}  // namespace egur::fusion
