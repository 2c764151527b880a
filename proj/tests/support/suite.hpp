#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "egur/featurestore.hpp"
#include "egur/matrix.hpp"
#include "egur/run_config.hpp"

namespace egur::testing {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

class Suite {
 public:
  void expect(const std::string& name, bool ok, const std::string& detail = "");
  void near(const std::string& name, double got, double want, double tol);
  // Records a failure instead of propagating an exception out of `body`.
  void guarded(const std::string& name, const std::function<void()>& body);

  const std::vector<CheckResult>& results() const { return results_; }
  std::size_t failures() const;

 private:
  std::vector<CheckResult> results_;
};

std::filesystem::path fixture_dir();
// Fresh (emptied) scratch directory under the build tree.
std::filesystem::path scratch_dir(const std::string& name);

store::SyntheticSpec load_fixture_spec(const std::string& name);

// Every worked example whose expected value comes from an independent oracle.
std::vector<CheckResult> run_derived_suite();

// Randomized invariants, each over at least `samples` draws.
std::vector<CheckResult> run_property_suite(std::size_t samples, std::uint64_t seed);

struct GradientReport {
  std::size_t points = 0;
  double max_relative_error = 0.0;
};
// Analytic probe gradient against central differences at seeded parameters.
GradientReport run_gradient_check(std::size_t points, std::uint64_t seed);

// End-to-end run of one committed fixture through synth -> fit -> eval.
struct RegimeOutcome {
  std::string branch;
  double alpha = 0.0;
  double matched_krr = 0.0;
  std::optional<double> egur_hc;
  std::optional<double> msp_hc;
  std::optional<double> residual_hc;
  std::optional<double> far_ood_fkar;  // EGUR-A at its own operating point
  // EGUR-A vs residual-only over a 9-point KRR sweep, skipping flagged rows
  double max_sweep_gap = 0.0;
};
// Synthesizes a committed fixture under work/data and returns its run config
// (methods egur, msp, residual_only; outputs in work/run).
cli::RunConfig fixture_run_config(const std::string& fixture, const std::filesystem::path& work);
RegimeOutcome run_regime(const std::string& fixture, const std::filesystem::path& work);

// Largest HC-FKAR@0.90 gap between EGUR-A and residual-only over the KRR sweep
// on the residual-dominant fixture.
inline constexpr double kSweepGapTolerance = 0.05;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0);

}  // namespace egur::testing
