#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "egur/candidate.hpp"
#include "egur/featurestore.hpp"
#include "egur/fusion.hpp"
#include "egur/local_evidence.hpp"
#include "egur/residual.hpp"

namespace egur {

// Every hyperparameter of the fitted acceptance pipeline.
struct PipelineConfig {
  // feature geometry
  bool normalize = true;
  // local evidence
  std::uint32_t k = 5;
  std::uint32_t m = 10;
  double q_sup = 0.95;
  bool global_support = false;
  double tau_con = 1.5;
  double tau_pur = 0.5;
  double tau_mar = 0.05;
  double tau_conf = 0.5;
  std::string checks = "sup,con,pur,mar";
  // residual evidence
  double variance_target = 0.90;
  std::optional<std::size_t> fixed_dim;
  double p_lo = 5.0;
  double p_hi = 95.0;
  // fusion and operating point
  double target_krr = 0.20;
  double t_hc = 0.90;
  std::optional<double> alpha_override;
  // candidate generator
  double temperature = 1.0;
  candidate::ProbeHyper probe;
  // fraction of known_train carved out as known_calib when the manifest has none
  double calib_fraction = 0.20;
  std::uint64_t seed = 0;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

std::string pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const std::string& text);

enum class LogitsSource { Probe, Pack };

struct FittedModel {
  PipelineConfig config;
  std::uint32_t known_class_count = 0;
  std::map<std::string, std::string> checksums;
  bool calib_carved = false;

  local::ClassIndex index;
  local::EvidenceThresholds thresholds;
  residual::IdSubspace subspace;
  residual::ResidualNormalizer normalizer;
  LogitsSource logits_source = LogitsSource::Probe;
  std::optional<candidate::LinearProbe> probe;
  fusion::EvidenceWeightSelection selection;
  fusion::OperatingPoint operating_point;

  double alpha() const { return selection.alpha; }
};

// Per-sample quantities the pipeline computes before thresholding.
struct SampleScores {
  candidate::CandidateOutput candidate;
  local::EvidenceVector evidence;
  double rho = 0.0;
  double r_res = 0.0;
  double r_a = 0.0;
};

// Stratified carve of known_train into (train, calib); deterministic in seed.
// Classes with a single sample stay entirely in train.
std::pair<store::FeaturePack, store::FeaturePack> carve_calibration(const store::FeaturePack& train,
                                                                     double fraction,
                                                                     std::uint64_t seed);

// Fits index -> thresholds -> subspace -> normalizer -> alpha -> tau_A.
FittedModel fit_model(const store::FeaturePack& known_train, const store::FeaturePack& known_calib,
                      const PipelineConfig& config);

// Loads the manifest's packs (carving known_calib when absent) and fits.
FittedModel fit_pipeline(const store::DatasetManifest& manifest, const PipelineConfig& config);

std::vector<SampleScores> score_pack(const FittedModel& model, const store::FeaturePack& pack);
SampleScores score_sample(const FittedModel& model, std::span<const double> prepared,
                          candidate::CandidateOutput candidate);

fusion::Decision decide(const SampleScores& scores, const FittedModel& model, double t_hc);

// Bundle file: "EGMB" | u32 version | u64 header_len | JSON header |
// sections { char tag[4] | u64 len | payload }. Numeric payloads are f64 LE
// except the embedded probe blob and i32 labels.
std::vector<std::uint8_t> encode_bundle(const FittedModel& model);
FittedModel decode_bundle(const std::vector<std::uint8_t>& bytes);
void save_bundle(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_bundle(const std::filesystem::path& path);

}  // namespace egur
