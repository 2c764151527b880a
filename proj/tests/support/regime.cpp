#include <algorithm>
#include <cmath>
#include <sstream>

#include "egur/commands.hpp"
#include "suite.hpp"

namespace egur::testing {

namespace {

std::optional<double> hc90(const metrics::MethodRow* row) {
  if (row == nullptr) return std::nullopt;
  const auto it = row->hc_fkar.find(0.90);
  if (it == row->hc_fkar.end()) return std::nullopt;
  return it->second;
}

}  // namespace

cli::RunConfig fixture_run_config(const std::string& fixture, const std::filesystem::path& work) {
  const auto data = work / "data";
  cli::cmd_synth(load_fixture_spec(fixture), data.string());

  auto config = cli::load_run_config((fixture_dir() / (fixture + ".config.json")).string());
  config.manifest = (data / "manifest.json").string();
  config.out_dir = (work / "run").string();
  config.methods = {"egur", "msp", "residual_only"};
  config.sweep.kind = metrics::TargetKind::Krr;
  config.sweep.methods = {"egur", "residual_only"};
  std::filesystem::create_directories(config.out_dir);
  return config;
}

RegimeOutcome run_regime(const std::string& fixture, const std::filesystem::path& work) {
  const auto config = fixture_run_config(fixture, work);
  std::ostringstream sink;
  const FittedModel model = cli::cmd_fit(config, sink);
  const auto bundle = (std::filesystem::path(config.out_dir) / cli::kBundleName).string();
  const auto report = cli::cmd_eval(config, bundle, sink);
  const auto sweep = cli::cmd_sweep(config, bundle, sink);

  RegimeOutcome out;
  out.branch = fusion::branch_name(model.selection.branch);
  out.alpha = model.alpha();
  if (const auto* row = report.find("default", "egur")) {
    out.matched_krr = row->krr;
    out.far_ood_fkar = row->far_ood_fkar;
  }
  out.egur_hc = hc90(report.find("matched", "egur"));
  out.msp_hc = hc90(report.find("matched", "msp"));
  out.residual_hc = hc90(report.find("matched", "residual_only"));

  for (const auto& a : sweep) {
    if (a.method != "egur" || !a.hc_fkar || a.flagged) continue;
    for (const auto& b : sweep) {
      if (b.method == "residual_only" && b.target == a.target && b.hc_fkar && !b.flagged) {
        out.max_sweep_gap = std::max(out.max_sweep_gap, std::abs(*a.hc_fkar - *b.hc_fkar));
      }
    }
  }
  return out;
}

}  // namespace egur::testing
