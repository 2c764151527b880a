#include "egur/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "egur/baselines.hpp"
#include "egur/candidate.hpp"
#include "egur/csv.hpp"
#include "egur/error.hpp"

namespace egur::cli {

namespace fs = std::filesystem;
using store::SplitRole;

namespace {

fs::path out_path(const RunConfig& config, const std::string& name) {
  fs::create_directories(config.out_dir);
  return fs::path(config.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

store::DatasetManifest open_manifest(const RunConfig& config) {
  if (config.manifest.empty()) throw UsageError("no manifest given (--manifest or config 'manifest')");
  return store::load_manifest(config.manifest);
}

SplitData make_split(const FittedModel& model, SplitRole role, store::FeaturePack pack) {
  SplitData s;
  s.role = role;
  s.pack = std::move(pack);
  if (s.pack.d != model.index.dim()) throw DataError(std::string(store::role_name(role)) + ": dimension differs from the fitted model");
  s.prepared = store::to_matrix(s.pack, model.config.normalize);
  if (model.logits_source == LogitsSource::Pack) {
    if (!s.pack.logits) throw DataError(std::string(store::role_name(role)) + ": pack has no logits");
    s.logits = Matrix(s.pack.n, s.pack.known_class_count,
                      std::vector<double>(s.pack.logits->begin(), s.pack.logits->end()));
  } else {
    s.logits = candidate::probe_logits(*model.probe, s.prepared);
  }
  s.scores = score_pack(model, s.pack);
  return s;
}

std::vector<double> negated(const std::vector<SampleScores>& scores, double SampleScores::*field) {
  std::vector<double> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(-(s.*field));
  return out;
}

std::vector<double> msp_of(const EvalContext& ctx, const SplitData& split) {
  return baselines::logit_scores(split.logits, baselines::LogitKind::Msp, ctx.model.config.temperature).values;
}

}  // namespace

ScoreTable read_scores(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  std::size_t id_col = 0, method_col = 0, score_col = 0;
  try {
    id_col = table.column("sample_id");
    method_col = table.column("method");
    score_col = table.column("score");
  } catch (const std::out_of_range&) {
    throw DataError(path + ": expected columns sample_id, method, score");
  }
  ScoreTable out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = path + " row " + std::to_string(r + 2);
    if (row[method_col].empty() || row[id_col].empty()) throw DataError(where + ": empty method or sample_id");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(row[score_col], &used);
      if (used != row[score_col].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(where + ": bad score '" + row[score_col] + "'");
    }
    if (!std::isfinite(v)) throw DataError(where + ": non-finite score");
    if (!out[row[method_col]].emplace(row[id_col], v).second) {
      throw DataError(where + ": duplicate score for " + row[id_col]);
    }
  }
  return out;
}

EvalContext load_context(const RunConfig& config, const std::string& bundle_path) {
  EvalContext ctx;
  ctx.config = config;
  const auto manifest = open_manifest(config);
  const bool has_calib = manifest.has_role(SplitRole::KnownCalib);
  const auto diags = store::validate_manifest(manifest, {.require_calib = has_calib});
  if (!diags.empty()) {
    throw DataError("manifest validation failed: " + diags.front().role + " " + diags.front().path + ": " +
                    diags.front().message);
  }
  if (!fs::exists(bundle_path)) throw DataError("bundle not found: " + bundle_path);
  ctx.model = load_bundle(bundle_path);
  if (ctx.model.checksums != manifest.checksums) warn("bundle was fitted on data with different checksums");

  store::FeaturePack calib;
  if (has_calib) {
    calib = store::load_pack(manifest.resolve(SplitRole::KnownCalib));
  } else {
    const auto train = store::load_pack(manifest.resolve(SplitRole::KnownTrain));
    calib = carve_calibration(train, ctx.model.config.calib_fraction, ctx.model.config.seed).second;
  }
  ctx.calib = make_split(ctx.model, SplitRole::KnownCalib, std::move(calib));
  ctx.known_test = make_split(ctx.model, SplitRole::KnownTest, store::load_pack(manifest.resolve(SplitRole::KnownTest)));
  ctx.unknown_test =
      make_split(ctx.model, SplitRole::UnknownTest, store::load_pack(manifest.resolve(SplitRole::UnknownTest)));
  if (manifest.has_role(SplitRole::FarOod)) {
    ctx.far_ood = make_split(ctx.model, SplitRole::FarOod, store::load_pack(manifest.resolve(SplitRole::FarOod)));
  }
  if (config.scores_file) ctx.imported = read_scores(*config.scores_file);
  return ctx;
}

void check_methods(const std::vector<std::string>& methods, const ScoreTable& imported) {
  if (methods.empty()) throw UsageError("no methods requested");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (!seen.insert(m).second) throw UsageError("method listed twice: " + m);
    if (contains(kBuiltinMethods, m) || imported.count(m)) continue;
    if (contains(kExternalMethods, m)) throw DataError("external score required: " + m);
    throw UsageError("unknown method tag: " + m);
  }
}

std::optional<std::vector<double>> method_scores(const EvalContext& ctx, const SplitData& split,
                                                 const std::string& method) {
  const auto& model = ctx.model;
  if (method == "egur") return negated(split.scores, &SampleScores::r_a);
  if (method == "residual_only") return negated(split.scores, &SampleScores::r_res);
  if (method == "msp") return msp_of(ctx, split);
  if (method == "energy" || method == "maxlogit" || method == "softmax_entropy") {
    const auto kind = method == "energy"   ? baselines::LogitKind::Energy
                      : method == "maxlogit" ? baselines::LogitKind::MaxLogit
                                             : baselines::LogitKind::SoftmaxEntropy;
    return baselines::logit_scores(split.logits, kind, model.config.temperature).values;
  }
  if (method == "knn" || method == "prototype" || method == "diag_mahalanobis") {
    const auto kind = method == "knn"         ? baselines::DistanceKind::Knn
                      : method == "prototype" ? baselines::DistanceKind::Prototype
                                              : baselines::DistanceKind::DiagMahalanobis;
    return baselines::distance_scores(split.prepared, model.index, kind, model.config.k).values;
  }
  if (method == "naive_fusion") {
    auto known_of = [](const SplitData& s) {
      std::vector<double> v;
      for (const auto& sc : s.scores) v.push_back(1.0 - sc.r_res);
      return v;
    };
    const auto msp_norm = baselines::fit_minmax(msp_of(ctx, ctx.calib));
    const auto res_norm = baselines::fit_minmax(known_of(ctx.calib));
    auto msp = msp_of(ctx, split);
    auto res = known_of(split);
    for (auto& v : msp) v = msp_norm.apply(v);
    for (auto& v : res) v = res_norm.apply(v);
    return baselines::naive_fusion_score(msp, res, ctx.config.beta).values;
  }
  const auto it = ctx.imported.find(method);
  if (it == ctx.imported.end()) {
    if (contains(kExternalMethods, method)) throw DataError("external score required: " + method);
    throw UsageError("unknown method tag: " + method);
  }
  std::vector<double> out;
  out.reserve(split.pack.n);
  for (const auto& id : split.pack.ids) {
    const auto hit = it->second.find(id);
    if (hit == it->second.end()) return std::nullopt;
    out.push_back(hit->second);
  }
  return out;
}

std::vector<metrics::Record> scored_records(const EvalContext& ctx, const std::string& method) {
  std::vector<metrics::Record> out;
  auto add = [&](const SplitData& split, metrics::Role role, bool required) {
    const auto scores = method_scores(ctx, split, method);
    if (!scores) {
      if (required) {
        throw DataError("imported scores for " + method + " do not cover " + store::role_name(split.role));
      }
      return;
    }
    for (std::size_t i = 0; i < split.pack.n; ++i) {
      metrics::Record r;
      r.role = role;
      r.label = split.pack.labels[i];
      r.candidate = split.scores[i].candidate.candidate;
      r.confidence = split.scores[i].candidate.confidence;
      r.unknown_class = store::stratum_of(split.pack.ids[i]);
      r.score = (*scores)[i];
      out.push_back(std::move(r));
    }
  };
  add(ctx.known_test, metrics::Role::KnownTest, true);
  add(ctx.unknown_test, metrics::Role::UnknownTest, true);
  if (ctx.far_ood) add(*ctx.far_ood, metrics::Role::FarOod, false);
  return out;
}

double default_threshold(const EvalContext& ctx, const std::string& method) {
  if (method == "egur") return -ctx.model.operating_point.threshold;
  auto calib = method_scores(ctx, ctx.calib, method);
  if (!calib) {
    warn("no calibration scores for " + method + "; default threshold taken on known_test");
    calib = method_scores(ctx, ctx.known_test, method);
  }
  return metrics::tpr_threshold(*calib, 0.95);
}

namespace {

void apply_threshold(std::vector<metrics::Record>& records, double threshold) {
  for (auto& r : records) r.accepted = *r.score >= threshold;
}

}  // namespace

csv::Table decisions_table(const EvalContext& ctx) {
  csv::Table t;
  t.header = {"sample_id", "role", "label", "candidate", "confidence", "s_sup", "s_con", "s_pur", "s_mar",
              "s_conf", "r_local", "rho", "r_res", "r_a", "state"};
  auto add = [&](const SplitData& split) {
    for (std::size_t i = 0; i < split.pack.n; ++i) {
      const auto& s = split.scores[i];
      const auto d = decide(s, ctx.model, ctx.model.config.t_hc);
      const auto& e = s.evidence;
      t.rows.push_back({split.pack.ids[i], store::role_name(split.role), std::to_string(split.pack.labels[i]),
                        std::to_string(s.candidate.candidate), csv::format_number(s.candidate.confidence),
                        csv::format_optional(e.s_sup), csv::format_optional(e.s_con),
                        csv::format_optional(e.s_pur), csv::format_optional(e.s_mar),
                        csv::format_optional(e.s_conf), csv::format_number(e.r_local), csv::format_number(s.rho),
                        csv::format_number(s.r_res), csv::format_number(s.r_a), fusion::state_name(d.state)});
    }
  };
  add(ctx.known_test);
  add(ctx.unknown_test);
  if (ctx.far_ood) add(*ctx.far_ood);
  return t;
}

store::DatasetManifest cmd_synth(const store::SyntheticSpec& spec, const std::string& out_dir) {
  store::validate_synthetic_spec(spec);
  fs::create_directories(out_dir);
  auto manifest = store::write_dataset(store::generate_synthetic(spec), out_dir);
  write_text(fs::path(out_dir) / "synth_spec.json", store::synthetic_spec_to_json(spec) + "\n");
  return manifest;
}

FittedModel cmd_fit(const RunConfig& config, std::ostream& out) {
  const auto manifest = open_manifest(config);
  const FittedModel model = fit_pipeline(manifest, config.effective_pipeline());
  const auto bundle = out_path(config, kBundleName);
  save_bundle(model, bundle);
  const auto& sel = model.selection;
  out << "branch: " << fusion::branch_name(sel.branch) << "\n"
      << "alpha: " << csv::format_number(sel.alpha) << "\n"
      << "alpha_ka: " << csv::format_optional(sel.alpha_ka) << "\n"
      << "cv_local: " << csv::format_number(sel.cv_local) << "\n"
      << "cv_res: " << csv::format_number(sel.cv_res) << "\n"
      << "tau_a: " << csv::format_number(model.operating_point.threshold) << "\n"
      << "target_krr: " << csv::format_number(model.operating_point.target_krr) << "\n"
      << "achieved_krr: " << csv::format_number(model.operating_point.achieved_krr) << "\n"
      << "calib_carved: " << (model.calib_carved ? "yes" : "no") << "\n"
      << "bundle: " << bundle.string() << "\n";
  return model;
}

metrics::EvalReport cmd_eval(const RunConfig& config, const std::string& bundle_path, std::ostream& out) {
  const EvalContext ctx = load_context(config, bundle_path);
  check_methods(config.methods, ctx.imported);

  metrics::EvalReport report;
  report.hc_thresholds = config.hc_thresholds;
  std::map<std::string, std::vector<metrics::Record>> records;
  for (const auto& m : config.methods) {
    auto recs = scored_records(ctx, m);
    const double thr = default_threshold(ctx, m);
    apply_threshold(recs, thr);
    report.rows.push_back(metrics::evaluate_method("default", m, thr, recs, report.hc_thresholds));
    records.emplace(m, std::move(recs));
  }

  // Matched table: every method re-thresholded on known_test to EGUR-A's KRR.
  double kappa = 0.0;
  if (const auto* egur = report.find("default", "egur")) {
    kappa = egur->krr;
  } else {
    auto recs = scored_records(ctx, "egur");
    apply_threshold(recs, default_threshold(ctx, "egur"));
    kappa = metrics::core_rates(recs).krr;
  }
  for (const auto& m : config.methods) {
    auto& recs = records.at(m);
    double thr = default_threshold(ctx, m);
    if (m != "egur") {
      std::vector<double> known;
      for (const auto& r : recs) {
        if (r.role == metrics::Role::KnownTest) known.push_back(*r.score);
      }
      thr = metrics::matched_krr_threshold(known, std::min(kappa, 1.0 - 1e-12)).threshold;
      apply_threshold(recs, thr);
    }
    report.rows.push_back(metrics::evaluate_method("matched", m, thr, recs, report.hc_thresholds));
  }

  csv::write_file(decisions_table(ctx), out_path(config, "decisions.csv"));
  csv::write_file(metrics::report_table(report), out_path(config, "report.csv"));
  write_text(out_path(config, "report.json"), metrics::report_json(report));
  out << "matched krr: " << csv::format_number(kappa) << "\n";
  for (const auto& row : report.rows) {
    if (row.table != "matched") continue;
    const auto hc = row.hc_fkar.find(0.90);
    out << row.method << ": krr " << csv::format_number(row.krr) << " fkar " << csv::format_number(row.fkar)
        << " hc_fkar@0.90 " << (hc == row.hc_fkar.end() ? "n/a" : csv::format_optional(hc->second))
        << " far_ood_fkar " << csv::format_optional(row.far_ood_fkar) << "\n";
  }
  return report;
}

std::vector<metrics::SweepRow> cmd_sweep(const RunConfig& config, const std::string& bundle_path,
                                         std::ostream& out) {
  const EvalContext ctx = load_context(config, bundle_path);
  check_methods(config.sweep.methods, ctx.imported);
  std::vector<metrics::SweepRow> rows;
  for (const auto& m : config.sweep.methods) {
    metrics::SweepInputs in;
    in.method = m;
    const auto calib = method_scores(ctx, ctx.calib, m);
    if (!calib) throw DataError("sweep needs calibration scores for " + m);
    in.calib_scores = *calib;
    in.calib_labels = ctx.calib.pack.labels;
    for (const auto& s : ctx.calib.scores) in.calib_candidates.push_back(s.candidate.candidate);
    in.test = scored_records(ctx, m);
    const auto part = metrics::operating_curve_sweep(in, config.sweep.kind, config.sweep.targets,
                                                     config.pipeline.t_hc);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto path = out_path(config, "sweep.csv");
  csv::write_file(metrics::sweep_table(rows), path);
  out << "sweep: " << rows.size() << " rows -> " << path.string() << "\n";
  return rows;
}

metrics::BootstrapResult cmd_bootstrap(const RunConfig& config, const std::string& bundle_path,
                                       std::ostream& out) {
  const EvalContext ctx = load_context(config, bundle_path);
  const auto& method = config.bootstrap.method;
  check_methods({method}, ctx.imported);
  auto recs = scored_records(ctx, method);
  apply_threshold(recs, default_threshold(ctx, method));
  metrics::BootstrapOptions opts;
  opts.repeats = config.bootstrap.repeats;
  opts.per_class = config.bootstrap.per_class;
  opts.seed = config.seed;
  opts.hc_thresholds = config.hc_thresholds;
  const auto result = metrics::bootstrap_stratified(recs, opts);
  const auto path = out_path(config, "bootstrap.csv");
  csv::write_file(metrics::bootstrap_table(result, method), path);
  out << "bootstrap " << method << ": fkar " << csv::format_number(result.fkar.mean) << " +- "
      << csv::format_number(result.fkar.std) << " over " << result.repeats << " repeats\n";
  return result;
}

ScoreTable cmd_import_scores(const RunConfig& config, const std::string& scores_path, std::ostream& out) {
  ScoreTable table = read_scores(scores_path);
  for (const auto& [method, scores] : table) {
    if (contains(kBuiltinMethods, method)) throw UsageError("imported method collides with a built-in: " + method);
  }
  if (!config.manifest.empty()) {
    const auto manifest = open_manifest(config);
    std::set<std::string> ids;
    for (const auto& [role, path] : manifest.splits) {
      for (auto& id : store::load_pack(manifest.base_dir / path).ids) ids.insert(std::move(id));
    }
    for (const auto& [method, scores] : table) {
      for (const auto& [id, v] : scores) {
        if (!ids.count(id)) throw DataError("imported score for unknown sample id " + id);
      }
    }
  }
  csv::Table normalized;
  normalized.header = {"sample_id", "method", "score"};
  for (const auto& [method, scores] : table) {
    for (const auto& [id, v] : scores) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      normalized.rows.push_back({id, method, buf});
    }
    out << method << ": " << scores.size() << " scores\n";
  }
  csv::write_file(normalized, out_path(config, kImportedScoresName));
  return table;
}

}  // namespace egur::cli
