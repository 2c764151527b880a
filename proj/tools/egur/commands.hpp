#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "egur/featurestore.hpp"
#include "egur/metrics.hpp"
#include "egur/pipeline.hpp"
#include "egur/run_config.hpp"

namespace egur::cli {

inline constexpr const char* kBundleName = "model.egmb";
inline constexpr const char* kImportedScoresName = "scores.csv";

// Imported external scores: method -> sample id -> score (higher = known).
using ScoreTable = std::map<std::string, std::map<std::string, double>>;
ScoreTable read_scores(const std::string& path);

// Everything one split contributes to an evaluation.
struct SplitData {
  store::SplitRole role = store::SplitRole::KnownTest;
  store::FeaturePack pack;
  Matrix prepared;
  Matrix logits;
  std::vector<SampleScores> scores;
};

struct EvalContext {
  RunConfig config;
  FittedModel model;
  SplitData calib;
  SplitData known_test;
  SplitData unknown_test;
  std::optional<SplitData> far_ood;
  ScoreTable imported;
};

EvalContext load_context(const RunConfig& config, const std::string& bundle_path);

// Per-sample "higher = known" scores of `method` on one split, or nullopt when
// an imported method has no score for some sample of that split.
std::optional<std::vector<double>> method_scores(const EvalContext& ctx, const SplitData& split,
                                                 const std::string& method);

// Throws UsageError for an unrecognized tag and DataError("external score
// required: <m>") when a known external method was not imported.
void check_methods(const std::vector<std::string>& methods, const ScoreTable& imported);

// Test records (known, unknown, far-OOD when scored) carrying `method` scores.
std::vector<metrics::Record> scored_records(const EvalContext& ctx, const std::string& method);

// Per-sample evidence, risks and three-state decisions on the test splits.
csv::Table decisions_table(const EvalContext& ctx);

// Default operating point of a method: tau_A for egur, otherwise the
// 95%-TPR threshold on known calibration scores.
double default_threshold(const EvalContext& ctx, const std::string& method);

store::DatasetManifest cmd_synth(const store::SyntheticSpec& spec, const std::string& out_dir);
FittedModel cmd_fit(const RunConfig& config, std::ostream& out);
metrics::EvalReport cmd_eval(const RunConfig& config, const std::string& bundle_path, std::ostream& out);
std::vector<metrics::SweepRow> cmd_sweep(const RunConfig& config, const std::string& bundle_path,
                                         std::ostream& out);
metrics::BootstrapResult cmd_bootstrap(const RunConfig& config, const std::string& bundle_path,
                                       std::ostream& out);
ScoreTable cmd_import_scores(const RunConfig& config, const std::string& scores_path, std::ostream& out);

}  // namespace egur::cli
