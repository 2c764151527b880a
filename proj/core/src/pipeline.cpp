#include "egur/pipeline.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "egur/error.hpp"
#include "json.hpp"

namespace egur {

using nlohmann::json;

std::string pipeline_config_to_json(const PipelineConfig& c) {
  json j;
  j["normalize"] = c.normalize;
  j["k"] = c.k;
  j["m"] = c.m;
  j["q_sup"] = c.q_sup;
  j["global_support"] = c.global_support;
  j["tau_con"] = c.tau_con;
  j["tau_pur"] = c.tau_pur;
  j["tau_mar"] = c.tau_mar;
  j["tau_conf"] = c.tau_conf;
  j["checks"] = c.checks;
  j["variance_target"] = c.variance_target;
  j["fixed_dim"] = c.fixed_dim ? json(*c.fixed_dim) : json(nullptr);
  j["p_lo"] = c.p_lo;
  j["p_hi"] = c.p_hi;
  j["target_krr"] = c.target_krr;
  j["t_hc"] = c.t_hc;
  j["alpha_override"] = c.alpha_override ? json(*c.alpha_override) : json(nullptr);
  j["temperature"] = c.temperature;
  j["probe_epochs"] = c.probe.epochs;
  j["probe_step_size"] = c.probe.step_size;
  j["probe_l2"] = c.probe.l2;
  j["probe_seed"] = c.probe.seed;
  j["calib_fraction"] = c.calib_fraction;
  j["seed"] = c.seed;
  return j.dump(2);
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j[key].is_null()) {
    out.reset();
  } else {
    out = j[key].get<T>();
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(const std::string& text) {
  PipelineConfig c;
  try {
    const json j = json::parse(text);
    c.normalize = j.value("normalize", c.normalize);
    c.k = j.value("k", c.k);
    c.m = j.value("m", c.m);
    c.q_sup = j.value("q_sup", c.q_sup);
    c.global_support = j.value("global_support", c.global_support);
    c.tau_con = j.value("tau_con", c.tau_con);
    c.tau_pur = j.value("tau_pur", c.tau_pur);
    c.tau_mar = j.value("tau_mar", c.tau_mar);
    c.tau_conf = j.value("tau_conf", c.tau_conf);
    c.checks = j.value("checks", c.checks);
    c.variance_target = j.value("variance_target", c.variance_target);
    read_opt(j, "fixed_dim", c.fixed_dim);
    c.p_lo = j.value("p_lo", c.p_lo);
    c.p_hi = j.value("p_hi", c.p_hi);
    c.target_krr = j.value("target_krr", c.target_krr);
    c.t_hc = j.value("t_hc", c.t_hc);
    read_opt(j, "alpha_override", c.alpha_override);
    c.temperature = j.value("temperature", c.temperature);
    c.probe.epochs = j.value("probe_epochs", c.probe.epochs);
    c.probe.step_size = j.value("probe_step_size", c.probe.step_size);
    c.probe.l2 = j.value("probe_l2", c.probe.l2);
    c.probe.seed = j.value("probe_seed", c.probe.seed);
    c.calib_fraction = j.value("calib_fraction", c.calib_fraction);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed pipeline config: ") + e.what());
  }
  return c;
}

std::pair<store::FeaturePack, store::FeaturePack> carve_calibration(const store::FeaturePack& train,
                                                                     double fraction,
                                                                     std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("calib fraction must lie in (0, 1)");
  std::map<std::int32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < train.n; ++i) by_class[train.labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<bool> to_calib(train.n, false);
  for (auto& [label, rows] : by_class) {
    if (rows.size() < 2) continue;
    std::shuffle(rows.begin(), rows.end(), rng);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    take = std::clamp<std::size_t>(take, 1, rows.size() - 1);
    for (std::size_t i = 0; i < take; ++i) to_calib[rows[i]] = true;
  }
  std::vector<std::size_t> keep, calib;
  for (std::size_t i = 0; i < train.n; ++i) (to_calib[i] ? calib : keep).push_back(i);
  return {store::select_rows(train, keep), store::select_rows(train, calib)};
}

namespace {

Matrix logits_matrix(const store::FeaturePack& pack) {
  if (!pack.logits) throw DataError("pack has no logits but the model reads candidates from logits");
  std::vector<double> v(pack.logits->begin(), pack.logits->end());
  return Matrix(pack.n, pack.known_class_count, std::move(v));
}

std::vector<candidate::CandidateOutput> candidates_for(const FittedModel& model,
                                                       const store::FeaturePack& pack,
                                                       const Matrix& prepared) {
  if (model.logits_source == LogitsSource::Pack) {
    return candidate::predict_candidates(logits_matrix(pack), model.config.temperature);
  }
  if (!model.probe) throw DataError("model has neither a probe nor pack logits");
  return candidate::predict_candidates(candidate::probe_logits(*model.probe, prepared),
                                       model.config.temperature);
}

}  // namespace

SampleScores score_sample(const FittedModel& model, std::span<const double> prepared,
                          candidate::CandidateOutput cand) {
  SampleScores s;
  s.candidate = std::move(cand);
  const auto c = s.candidate.candidate;
  s.evidence = local::evidence_strengths(local::measure(prepared, c, model.index, model.thresholds.mask),
                                         c, model.thresholds);
  s.rho = residual::residual_norm(prepared, model.subspace);
  s.r_res = residual::normalized_risk(s.rho, model.normalizer);
  s.r_a = fusion::fuse_risk(s.evidence.r_local, s.r_res, model.alpha());
  return s;
}

std::vector<SampleScores> score_pack(const FittedModel& model, const store::FeaturePack& pack) {
  if (pack.d != model.index.dim()) throw DataError("pack dimension differs from the fitted model");
  const Matrix prepared = store::to_matrix(pack, model.config.normalize);
  auto cands = candidates_for(model, pack, prepared);
  std::vector<SampleScores> out;
  out.reserve(pack.n);
  for (std::size_t i = 0; i < pack.n; ++i) out.push_back(score_sample(model, prepared.row(i), std::move(cands[i])));
  return out;
}

fusion::Decision decide(const SampleScores& s, const FittedModel& model, double t_hc) {
  return fusion::decide(s.candidate.candidate, s.candidate.confidence, s.evidence.r_local, s.r_res,
                        model.alpha(), model.operating_point.threshold, t_hc);
}

FittedModel fit_model(const store::FeaturePack& known_train, const store::FeaturePack& known_calib,
                      const PipelineConfig& config) {
  store::validate_pack(known_train);
  store::validate_pack(known_calib);
  if (known_train.d != known_calib.d) throw DataError("train and calibration dimensions differ");
  for (const auto* pack : {&known_train, &known_calib}) {
    if (std::find(pack->labels.begin(), pack->labels.end(), store::kUnknownLabel) != pack->labels.end()) {
      throw DataError("known split contains unknown label");
    }
  }

  FittedModel model;
  model.config = config;
  model.known_class_count = known_train.known_class_count;
  const auto K = model.known_class_count;

  const Matrix train = store::to_matrix(known_train, config.normalize);
  model.index = local::fit_class_index(train, known_train.labels, K, config.k, config.m,
                                       /*normalize=*/false);
  model.thresholds = local::calibrate_support_thresholds(model.index, {config.q_sup, config.global_support});
  model.thresholds.contrast = config.tau_con;
  model.thresholds.purity = config.tau_pur;
  model.thresholds.margin = config.tau_mar;
  model.thresholds.conflict = config.tau_conf;
  model.thresholds.mask = local::CheckMask::parse(config.checks);

  model.subspace = residual::fit_subspace(train, {config.variance_target, config.fixed_dim});
  const auto train_rho = residual::residual_norms(train, model.subspace);
  model.normalizer = residual::fit_normalizer(train_rho, config.p_lo, config.p_hi);

  if (known_train.has_logits()) {
    model.logits_source = LogitsSource::Pack;
  } else {
    model.logits_source = LogitsSource::Probe;
    model.probe = candidate::train_linear_probe(train, known_train.labels, K, config.probe);
  }

  // alpha is not known yet; only r_local and r_res from this pass are used.
  model.selection.alpha = 1.0;
  const auto calib = score_pack(model, known_calib);
  std::vector<double> r_local, r_res;
  std::vector<std::int32_t> cands;
  for (const auto& s : calib) {
    r_local.push_back(s.evidence.r_local);
    r_res.push_back(s.r_res);
    cands.push_back(s.candidate.candidate);
  }

  if (config.alpha_override) {
    const double alpha = *config.alpha_override;
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha override must lie in [0, 1]");
    fusion::EvidenceWeightSelection sel;
    sel.branch = fusion::Branch::Override;
    sel.alpha = alpha;
    try {
      sel.cv_local = fusion::coefficient_of_variation(r_local);
      sel.cv_res = fusion::coefficient_of_variation(r_res);
    } catch (const std::invalid_argument&) {
      // CVs are informational under an override.
    }
    model.selection = sel;
  } else {
    model.selection = fusion::select_alpha(r_local, r_res, cands, known_calib.labels, config.target_krr);
  }

  std::vector<double> fused(calib.size());
  for (std::size_t i = 0; i < calib.size(); ++i) {
    fused[i] = fusion::fuse_risk(r_local[i], r_res[i], model.alpha());
  }
  model.operating_point = fusion::calibrate_threshold(fused, config.target_krr);
  return model;
}

FittedModel fit_pipeline(const store::DatasetManifest& manifest, const PipelineConfig& config) {
  const bool has_calib = manifest.has_role(store::SplitRole::KnownCalib);
  const auto diags = store::validate_manifest(manifest, {.require_calib = has_calib});
  if (!diags.empty()) {
    throw DataError("manifest validation failed: " + diags.front().role + " " + diags.front().path +
                    ": " + diags.front().message);
  }
  auto train = store::load_pack(manifest.resolve(store::SplitRole::KnownTrain));
  store::FeaturePack calib;
  if (has_calib) {
    calib = store::load_pack(manifest.resolve(store::SplitRole::KnownCalib));
  } else {
    std::tie(train, calib) = carve_calibration(train, config.calib_fraction, config.seed);
  }
  if (train.known_class_count != manifest.known_class_count) {
    throw DataError("known class count differs from manifest");
  }
  auto model = fit_model(train, calib, config);
  model.checksums = manifest.checksums;
  model.calib_carved = !has_calib;
  return model;
}

}  // namespace egur
