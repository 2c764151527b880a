#include "egur/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "egur/commands.hpp"
#include "egur/error.hpp"
#include "egur/run_config.hpp"

namespace egur::cli {

namespace {

// Flag values, applied over the config file only when given.
struct Flags {
  std::string config;
  std::string manifest;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string bundle;
  std::uint32_t k = 0, m = 0;
  double tau_con = 0, tau_pur = 0, tau_mar = 0, tau_conf = 0, q_sup = 0;
  double variance_target = 0, p_lo = 0, p_hi = 0;
  std::size_t fixed_dim = 0;
  double target_krr = 0, t_hc = 0, alpha = 0, beta = 0, temperature = 0;
  std::string checks;
  std::vector<std::string> methods;
  std::vector<double> hc_thresholds;
  std::size_t repeats = 0, per_class = 0;
  std::string bootstrap_method;
  std::string sweep_kind;
  std::vector<double> targets;
  std::vector<std::string> sweep_methods;
  std::string scores;
  std::uint32_t probe_epochs = 0;

  std::map<std::string, CLI::Option*> opts;
  bool given(const std::string& name) const {
    const auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_run_flags(CLI::App* app, Flags& f) {
  auto add = [&](const std::string& name, auto& var, const std::string& help) {
    f.opts[name] = app->add_option("--" + name, var, help);
  };
  auto add_list = [&](const std::string& name, auto& var, const std::string& help) {
    f.opts[name] = app->add_option("--" + name, var, help)->delimiter(',');
  };
  add("config", f.config, "Run config JSON; flags override its values");
  add("manifest", f.manifest, "Dataset manifest");
  add("out-dir", f.out_dir, "Output directory");
  add("seed", f.seed, "Seed (falls back to the config, then EGUR_SEED)");
  add("bundle", f.bundle, "Model bundle (default <out-dir>/model.egmb)");
  add("k", f.k, "Support depth");
  add("m", f.m, "Purity neighborhood size");
  add("tau-con", f.tau_con, "Contrast threshold");
  add("tau-pur", f.tau_pur, "Purity threshold");
  add("tau-mar", f.tau_mar, "Margin threshold");
  add("tau-conf", f.tau_conf, "Conflict threshold");
  add("q-sup", f.q_sup, "Support quantile");
  add("checks", f.checks, "Active checks, e.g. sup,con,pur,mar");
  add("variance-target", f.variance_target, "Retained variance of the ID subspace");
  add("fixed-dim", f.fixed_dim, "Fixed ID subspace dimension");
  add("p-lo", f.p_lo, "Lower residual percentile anchor");
  add("p-hi", f.p_hi, "Upper residual percentile anchor");
  add("target-krr", f.target_krr, "Target known rejection rate");
  add("t-hc", f.t_hc, "High-confidence threshold");
  add("alpha", f.alpha, "Evidence weight override");
  add("temperature", f.temperature, "Softmax temperature");
  add("probe-epochs", f.probe_epochs, "Linear probe epochs");
  add("beta", f.beta, "Naive fusion weight on MSP");
  add_list("methods", f.methods, "Methods to evaluate");
  add_list("hc-thresholds", f.hc_thresholds, "HC-FKAR thresholds");
  add("repeats", f.repeats, "Bootstrap repeats");
  add("per-class", f.per_class, "Bootstrap resample size per class");
  add("bootstrap-method", f.bootstrap_method, "Method whose acceptances are bootstrapped");
  add("sweep-kind", f.sweep_kind, "krr or known_acc");
  add_list("targets", f.targets, "Sweep targets");
  add_list("sweep-methods", f.sweep_methods, "Methods to sweep");
  add("scores", f.scores, "Imported external scores CSV");
}

RunConfig build_config(const Flags& f) {
  RunConfig c;
  bool seed_in_file = false;
  if (f.given("config")) c = load_run_config(f.config, &seed_in_file);
  auto& p = c.pipeline;
  if (f.given("manifest")) c.manifest = f.manifest;
  if (f.given("out-dir")) c.out_dir = f.out_dir;
  if (f.given("seed")) {
    c.seed = f.seed;
  } else if (!seed_in_file) {
    if (const auto env = env_seed()) c.seed = *env;
  }
  if (f.given("k")) p.k = f.k;
  if (f.given("m")) p.m = f.m;
  if (f.given("tau-con")) p.tau_con = f.tau_con;
  if (f.given("tau-pur")) p.tau_pur = f.tau_pur;
  if (f.given("tau-mar")) p.tau_mar = f.tau_mar;
  if (f.given("tau-conf")) p.tau_conf = f.tau_conf;
  if (f.given("q-sup")) p.q_sup = f.q_sup;
  if (f.given("checks")) p.checks = f.checks;
  if (f.given("variance-target")) p.variance_target = f.variance_target;
  if (f.given("fixed-dim")) p.fixed_dim = f.fixed_dim;
  if (f.given("p-lo")) p.p_lo = f.p_lo;
  if (f.given("p-hi")) p.p_hi = f.p_hi;
  if (f.given("target-krr")) p.target_krr = f.target_krr;
  if (f.given("t-hc")) p.t_hc = f.t_hc;
  if (f.given("alpha")) p.alpha_override = f.alpha;
  if (f.given("temperature")) p.temperature = f.temperature;
  if (f.given("probe-epochs")) p.probe.epochs = f.probe_epochs;
  if (f.given("beta")) c.beta = f.beta;
  if (f.given("methods")) c.methods = f.methods;
  if (f.given("hc-thresholds")) c.hc_thresholds = f.hc_thresholds;
  if (f.given("repeats")) c.bootstrap.repeats = f.repeats;
  if (f.given("per-class")) c.bootstrap.per_class = f.per_class;
  if (f.given("bootstrap-method")) c.bootstrap.method = f.bootstrap_method;
  if (f.given("sweep-kind")) {
    if (f.sweep_kind == "krr") c.sweep.kind = metrics::TargetKind::Krr;
    else if (f.sweep_kind == "known_acc") c.sweep.kind = metrics::TargetKind::KnownAcc;
    else throw UsageError("--sweep-kind must be krr or known_acc");
  }
  if (f.given("targets")) c.sweep.targets = f.targets;
  if (f.given("sweep-methods")) c.sweep.methods = f.sweep_methods;
  if (f.given("scores")) c.scores_file = f.scores;
  p.seed = c.seed;
  p.probe.seed = c.seed;
  return c;
}

std::string bundle_path(const Flags& f, const RunConfig& c) {
  if (f.given("bundle")) return f.bundle;
  return (std::filesystem::path(c.out_dir) / kBundleName).string();
}

RunConfig prepare(const Flags& f, const std::string& command) {
  RunConfig c = build_config(f);
  std::filesystem::create_directories(c.out_dir);
  save_run_config(c, (std::filesystem::path(c.out_dir) / (command + ".config.json")).string());
  return c;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evidence-guided open-set acceptance on precomputed features"};
  app.require_subcommand(1);

  std::string spec_path, synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a spec file");
  synth->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
  auto* synth_out_opt = synth->add_option("--out-dir", synth_out, "Output directory");
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "Seed override");

  Flags fit_f, eval_f, sweep_f, boot_f, import_f;
  auto* fit = app.add_subcommand("fit", "Fit the acceptance pipeline and write a model bundle");
  add_run_flags(fit, fit_f);
  auto* eval = app.add_subcommand("eval", "Evaluate a bundle and write report tables");
  add_run_flags(eval, eval_f);
  auto* sweep = app.add_subcommand("sweep", "Operating-point sweep");
  add_run_flags(sweep, sweep_f);
  auto* boot = app.add_subcommand("bootstrap", "Class-stratified bootstrap of unknown-side rates");
  add_run_flags(boot, boot_f);
  auto* import = app.add_subcommand("import-scores", "Validate and import external method scores");
  add_run_flags(import, import_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg, help;
    const int code = app.exit(e, help, msg);
    out << help.str();
    err << msg.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      std::ifstream in(spec_path);
      if (!in) throw DataError("spec file not found: " + spec_path);
      std::ostringstream buf;
      buf << in.rdbuf();
      auto spec = store::synthetic_spec_from_json(buf.str());
      if (synth_seed_opt->count()) {
        spec.seed = synth_seed;
      } else if (buf.str().find("\"seed\"") == std::string::npos) {
        if (const auto env = env_seed()) spec.seed = *env;
      }
      const std::string dir = synth_out_opt->count() ? synth_out : ".";
      const auto manifest = cmd_synth(spec, dir);
      out << "manifest: " << (std::filesystem::path(dir) / "manifest.json").string() << "\n";
      for (const auto& [role, path] : manifest.splits) out << role << ": " << path << "\n";
    } else if (fit->parsed()) {
      cmd_fit(prepare(fit_f, "fit"), out);
    } else if (eval->parsed()) {
      const auto c = prepare(eval_f, "eval");
      cmd_eval(c, bundle_path(eval_f, c), out);
    } else if (sweep->parsed()) {
      const auto c = prepare(sweep_f, "sweep");
      cmd_sweep(c, bundle_path(sweep_f, c), out);
    } else if (boot->parsed()) {
      const auto c = prepare(boot_f, "bootstrap");
      cmd_bootstrap(c, bundle_path(boot_f, c), out);
    } else if (import->parsed()) {
      if (!import_f.given("scores")) throw UsageError("import-scores needs --scores");
      const auto c = prepare(import_f, "import-scores");
      cmd_import_scores(c, *c.scores_file, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace egur::cli
