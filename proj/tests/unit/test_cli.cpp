#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "egur/cli.hpp"
#include "egur/commands.hpp"
#include "egur/csv.hpp"
#include "suite.hpp"

using namespace egur;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "egur");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// A small dataset shared by the CLI cases.
const fs::path& small_dataset() {
  static const fs::path dir = [] {
    const auto d = testing::scratch_dir("unit_cli_data");
    store::SyntheticSpec spec;
    spec.known_classes = 4;
    spec.train_per_class = 30;
    spec.calib_per_class = 15;
    spec.test_per_class = 15;
    spec.unknown_classes = 3;
    spec.unknown_per_class = 15;
    spec.far_ood_count = 20;
    spec.seed = 5;
    write(d / "spec.json", store::synthetic_spec_to_json(spec));
    REQUIRE(run({"synth", "--spec", (d / "spec.json").string(), "--out-dir", (d / "data").string()}).code == 0);
    return d;
  }();
  return dir;
}

std::string manifest() { return (small_dataset() / "data" / "manifest.json").string(); }

std::string fitted(const std::string& name) {
  const auto out = testing::scratch_dir("unit_cli_" + name);
  REQUIRE(run({"fit", "--manifest", manifest(), "--out-dir", out.string(), "--probe-epochs", "80"}).code == 0);
  return out.string();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth writes a manifest and packs") {
    const auto data = small_dataset() / "data";
    CHECK(fs::exists(data / "manifest.json"));
    for (const char* role : {"known_train", "known_calib", "known_test", "unknown_test", "far_ood"}) {
      CHECK(fs::exists(data / (std::string(role) + ".egfp")));
    }
    CHECK(store::validate_manifest(store::load_manifest(data / "manifest.json")).empty());
  }

  TEST_CASE("synth rejects a single known class") {
    const auto d = testing::scratch_dir("unit_cli_k1");
    write(d / "spec.json", R"({"known_classes": 1})");
    const auto r = run({"synth", "--spec", (d / "spec.json").string(), "--out-dir", d.string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("K < 2") != std::string::npos);
  }

  TEST_CASE("usage errors") {
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"fit", "--bogus"}).code == cli::kExitUsage);
    CHECK(run({"--help"}).code == cli::kExitOk);
    const auto missing = run({"fit", "--manifest", "/nonexistent/manifest.json", "--out-dir",
                              testing::scratch_dir("unit_cli_missing").string()});
    CHECK(missing.code == cli::kExitData);
  }

  TEST_CASE("alpha override is recorded") {
    const auto out = testing::scratch_dir("unit_cli_override");
    const auto r = run({"fit", "--manifest", manifest(), "--out-dir", out.string(), "--alpha", "0.6",
                        "--probe-epochs", "40"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("branch: override") != std::string::npos);
    CHECK(r.out.find("alpha: 0.6\n") != std::string::npos);
    const auto model = load_bundle(out / cli::kBundleName);
    CHECK(model.alpha() == 0.6);
    CHECK(model.selection.branch == fusion::Branch::Override);
  }

  TEST_CASE("eval writes reports and rejects unavailable methods") {
    const auto out = fitted("eval");
    const auto ok = run({"eval", "--manifest", manifest(), "--out-dir", out});
    REQUIRE(ok.code == 0);
    const auto table = csv::read_file(fs::path(out) / "report.csv");
    CHECK(table.rows.size() == 2 * cli::kBuiltinMethods.size());
    CHECK(table.column("far_ood_fkar") < table.header.size());
    CHECK(fs::exists(fs::path(out) / "decisions.csv"));
    CHECK(fs::exists(fs::path(out) / "eval.config.json"));

    const auto vim = run({"eval", "--manifest", manifest(), "--out-dir", out, "--methods", "egur,vim"});
    CHECK(vim.code == cli::kExitData);
    CHECK(vim.err.find("external score required") != std::string::npos);
    const auto bad = run({"eval", "--manifest", manifest(), "--out-dir", out, "--methods", "nonsense"});
    CHECK(bad.code == cli::kExitUsage);
  }

  TEST_CASE("imported scores join the report") {
    const auto out = fitted("import");
    std::ostringstream csv_text;
    csv_text << "sample_id,method,score\n";
    for (const char* role : {"known_calib", "known_test", "unknown_test", "far_ood"}) {
      const auto pack = store::load_pack(small_dataset() / "data" / (std::string(role) + ".egfp"));
      for (std::size_t i = 0; i < pack.n; ++i) csv_text << pack.ids[i] << ",vim," << (pack.labels[i] >= 0 ? 1.0 : 0.0) + 0.001 * i << "\n";
    }
    write(fs::path(out) / "vim.csv", csv_text.str());
    const auto imp = run({"import-scores", "--manifest", manifest(), "--out-dir", out, "--scores",
                          (fs::path(out) / "vim.csv").string()});
    REQUIRE(imp.code == 0);
    const auto scores = (fs::path(out) / cli::kImportedScoresName).string();
    const auto r = run({"eval", "--manifest", manifest(), "--out-dir", out, "--methods", "egur,vim", "--scores", scores});
    CHECK(r.code == 0);
    CHECK(r.out.find("vim:") != std::string::npos);

    write(fs::path(out) / "clash.csv", "sample_id,method,score\nx,msp,1\n");
    CHECK(run({"import-scores", "--out-dir", out, "--scores", (fs::path(out) / "clash.csv").string()}).code ==
          cli::kExitUsage);
  }

  TEST_CASE("bootstrap is deterministic") {
    const auto out = fitted("boot");
    const std::vector<std::string> args = {"bootstrap", "--manifest", manifest(), "--out-dir", out,
                                           "--repeats", "200", "--seed", "5"};
    REQUIRE(run(args).code == 0);
    const auto first = slurp(fs::path(out) / "bootstrap.csv");
    REQUIRE(run(args).code == 0);
    CHECK(first == slurp(fs::path(out) / "bootstrap.csv"));
    CHECK(!first.empty());
  }

  TEST_CASE("seed falls back to the environment") {
    const auto out = testing::scratch_dir("unit_cli_seed");
    ::setenv("EGUR_SEED", "42", 1);
    const auto r = run({"fit", "--manifest", manifest(), "--out-dir", out.string(), "--probe-epochs", "20"});
    ::unsetenv("EGUR_SEED");
    REQUIRE(r.code == 0);
    CHECK(cli::load_run_config((out / "fit.config.json").string()).seed == 42);
    const auto flag = run({"fit", "--manifest", manifest(), "--out-dir", out.string(), "--probe-epochs", "20",
                           "--seed", "7"});
    REQUIRE(flag.code == 0);
    CHECK(cli::load_run_config((out / "fit.config.json").string()).seed == 7);
  }

  TEST_CASE("run config round-trip") {
    cli::RunConfig c;
    c.manifest = "m.json";
    c.seed = 9;
    c.methods = {"egur", "msp"};
    c.scores_file = "s.csv";
    c.bootstrap.per_class = 12;
    c.sweep.kind = metrics::TargetKind::KnownAcc;
    c.pipeline.fixed_dim = 4;
    bool seeded = false;
    CHECK(cli::run_config_from_json(cli::run_config_to_json(c), &seeded) == c);
    CHECK(seeded);
    CHECK_THROWS_AS(cli::run_config_from_json(R"({"nope": 1})"), cli::UsageError);
  }

  TEST_CASE("installed binary answers --help") {
    const std::string cmd = std::string("\"") + EGUR_BINARY + "\" --help > /dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
  }
}
