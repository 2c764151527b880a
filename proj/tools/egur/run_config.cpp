#include "egur/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "egur/error.hpp"
#include "json.hpp"

namespace egur::cli {

using nlohmann::json;

PipelineConfig RunConfig::effective_pipeline() const {
  PipelineConfig p = pipeline;
  p.seed = seed;
  p.probe.seed = seed;
  return p;
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["manifest"] = c.manifest;
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  j["pipeline"] = json::parse(pipeline_config_to_json(c.pipeline));
  j["methods"] = c.methods;
  j["hc_thresholds"] = c.hc_thresholds;
  j["beta"] = c.beta;
  j["scores_file"] = c.scores_file ? json(*c.scores_file) : json(nullptr);
  j["bootstrap"] = {{"repeats", c.bootstrap.repeats},
                    {"per_class", c.bootstrap.per_class ? json(*c.bootstrap.per_class) : json(nullptr)},
                    {"method", c.bootstrap.method}};
  j["sweep"] = {{"kind", metrics::target_kind_name(c.sweep.kind)},
                {"targets", c.sweep.targets},
                {"methods", c.sweep.methods}};
  return j.dump(2) + "\n";
}

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw UsageError("unknown config key '" + where + key + "'");
  }
}

metrics::TargetKind parse_kind(const std::string& s) {
  if (s == "krr") return metrics::TargetKind::Krr;
  if (s == "known_acc") return metrics::TargetKind::KnownAcc;
  throw UsageError("sweep kind must be krr or known_acc, got '" + s + "'");
}

}  // namespace

RunConfig run_config_from_json(const std::string& text, bool* seed_present) {
  RunConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    reject_unknown_keys(j, {"manifest", "out_dir", "seed", "pipeline", "methods", "hc_thresholds", "beta",
                            "scores_file", "bootstrap", "sweep"}, "");
    c.manifest = j.value("manifest", c.manifest);
    c.out_dir = j.value("out_dir", c.out_dir);
    if (seed_present) *seed_present = j.contains("seed");
    c.seed = j.value("seed", c.seed);
    if (j.contains("pipeline")) c.pipeline = pipeline_config_from_json(j["pipeline"].dump());
    c.methods = j.value("methods", c.methods);
    c.hc_thresholds = j.value("hc_thresholds", c.hc_thresholds);
    c.beta = j.value("beta", c.beta);
    if (j.contains("scores_file") && !j["scores_file"].is_null()) c.scores_file = j["scores_file"].get<std::string>();
    if (j.contains("bootstrap")) {
      const auto& b = j["bootstrap"];
      reject_unknown_keys(b, {"repeats", "per_class", "method"}, "bootstrap.");
      c.bootstrap.repeats = b.value("repeats", c.bootstrap.repeats);
      if (b.contains("per_class") && !b["per_class"].is_null()) c.bootstrap.per_class = b["per_class"].get<std::size_t>();
      c.bootstrap.method = b.value("method", c.bootstrap.method);
    }
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      reject_unknown_keys(s, {"kind", "targets", "methods"}, "sweep.");
      if (s.contains("kind")) c.sweep.kind = parse_kind(s["kind"].get<std::string>());
      c.sweep.targets = s.value("targets", c.sweep.targets);
      c.sweep.methods = s.value("methods", c.sweep.methods);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path, bool* seed_present) {
  std::ifstream in(path);
  if (!in) throw DataError("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str(), seed_present);
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << run_config_to_json(config);
}

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("EGUR_SEED");
  if (!raw || !*raw) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (*end != '\0') throw UsageError(std::string("EGUR_SEED is not a number: ") + raw);
  return v;
}

}  // namespace egur::cli
