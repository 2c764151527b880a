#include "suite.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "egur/csv.hpp"

namespace egur::testing {

void Suite::expect(const std::string& name, bool ok, const std::string& detail) {
  results_.push_back({name, ok, detail});
}

void Suite::near(const std::string& name, double got, double want, double tol) {
  const bool ok = std::abs(got - want) <= tol;
  expect(name, ok, "got " + csv::format_number(got) + ", want " + csv::format_number(want));
}

void Suite::guarded(const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    expect(name, false, std::string("threw: ") + e.what());
  }
}

std::size_t Suite::failures() const {
  std::size_t n = 0;
  for (const auto& r : results_) n += !r.pass;
  return n;
}

std::filesystem::path fixture_dir() { return EGUR_FIXTURE_DIR; }

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(EGUR_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

store::SyntheticSpec load_fixture_spec(const std::string& name) {
  std::ifstream in(fixture_dir() / (name + ".spec.json"));
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::ostringstream buf;
  buf << in.rdbuf();
  return store::synthetic_spec_from_json(buf.str());
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = normal(rng);
  return m;
}

}  // namespace egur::testing
