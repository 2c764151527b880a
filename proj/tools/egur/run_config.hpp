#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "egur/metrics.hpp"
#include "egur/pipeline.hpp"

namespace egur::cli {

// Bad flags, unknown method tags, malformed config: exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string> kBuiltinMethods = {
    "egur", "msp", "energy", "maxlogit", "softmax_entropy", "knn", "prototype",
    "diag_mahalanobis", "residual_only", "naive_fusion"};

// Scores for these only ever come from an imported file.
inline const std::vector<std::string> kExternalMethods = {
    "gen", "react", "nnguide", "vim", "fdbd", "scale", "nci", "cadref"};

struct BootstrapSettings {
  std::size_t repeats = 1000;
  std::optional<std::size_t> per_class;
  std::string method = "egur";
  friend bool operator==(const BootstrapSettings&, const BootstrapSettings&) = default;
};

struct SweepSettings {
  metrics::TargetKind kind = metrics::TargetKind::Krr;
  std::vector<double> targets = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45};
  std::vector<std::string> methods = {"egur", "residual_only"};
  friend bool operator==(const SweepSettings&, const SweepSettings&) = default;
};

struct RunConfig {
  std::string manifest;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  PipelineConfig pipeline;
  std::vector<std::string> methods = kBuiltinMethods;
  std::vector<double> hc_thresholds = metrics::kDefaultHcThresholds;
  double beta = 0.5;  // naive fusion weight on normalized MSP
  std::optional<std::string> scores_file;
  BootstrapSettings bootstrap;
  SweepSettings sweep;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  // Pipeline settings with the run seed applied to the carve and the probe.
  PipelineConfig effective_pipeline() const;
};

std::string run_config_to_json(const RunConfig& config);

// Missing keys keep their defaults; unknown keys are a UsageError.
// `seed_present` reports whether the text set the seed.
RunConfig run_config_from_json(const std::string& text, bool* seed_present = nullptr);

RunConfig load_run_config(const std::string& path, bool* seed_present = nullptr);
void save_run_config(const RunConfig& config, const std::string& path);

// Seed from the EGUR_SEED environment variable, if set and numeric.
std::optional<std::uint64_t> env_seed();

}  // namespace egur::cli
