#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "egur/error.hpp"
#include "egur/featurestore.hpp"
#include "json.hpp"

namespace egur::store {

using nlohmann::json;

std::string synthetic_spec_to_json(const SyntheticSpec& s) {
  json j;
  j["known_classes"] = s.known_classes;
  j["train_per_class"] = s.train_per_class;
  j["calib_per_class"] = s.calib_per_class;
  j["test_per_class"] = s.test_per_class;
  j["dim"] = s.dim;
  j["id_dim"] = s.id_dim;
  j["prototype_radius"] = s.prototype_radius;
  j["cluster_scale"] = s.cluster_scale;
  j["residual_noise"] = s.residual_noise;
  j["diffuse_fraction"] = s.diffuse_fraction;
  j["diffuse_scale"] = s.diffuse_scale;
  j["unknown_classes"] = s.unknown_classes;
  j["unknown_per_class"] = s.unknown_per_class;
  j["offset_magnitude"] = s.offset_magnitude;
  j["in_subspace_fraction"] = s.in_subspace_fraction;
  j["far_ood_count"] = s.far_ood_count;
  j["far_ood_scale"] = s.far_ood_scale;
  j["seed"] = s.seed;
  j["encoder"] = s.encoder;
  return j.dump(2) + "\n";
}

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
  SyntheticSpec s;
  try {
    const json j = json::parse(text);
    s.known_classes = j.value("known_classes", s.known_classes);
    s.train_per_class = j.value("train_per_class", s.train_per_class);
    s.calib_per_class = j.value("calib_per_class", s.calib_per_class);
    s.test_per_class = j.value("test_per_class", s.test_per_class);
    s.dim = j.value("dim", s.dim);
    s.id_dim = j.value("id_dim", s.id_dim);
    s.prototype_radius = j.value("prototype_radius", s.prototype_radius);
    s.cluster_scale = j.value("cluster_scale", s.cluster_scale);
    s.residual_noise = j.value("residual_noise", s.residual_noise);
    s.diffuse_fraction = j.value("diffuse_fraction", s.diffuse_fraction);
    s.diffuse_scale = j.value("diffuse_scale", s.diffuse_scale);
    s.unknown_classes = j.value("unknown_classes", s.unknown_classes);
    s.unknown_per_class = j.value("unknown_per_class", s.unknown_per_class);
    s.offset_magnitude = j.value("offset_magnitude", s.offset_magnitude);
    s.in_subspace_fraction = j.value("in_subspace_fraction", s.in_subspace_fraction);
    s.far_ood_count = j.value("far_ood_count", s.far_ood_count);
    s.far_ood_scale = j.value("far_ood_scale", s.far_ood_scale);
    s.seed = j.value("seed", s.seed);
    s.encoder = j.value("encoder", s.encoder);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed synthetic spec: ") + e.what());
  }
  return s;
}

namespace {

std::uint32_t effective_id_dim(const SyntheticSpec& s) {
  if (s.id_dim != 0) return s.id_dim;
  const std::uint32_t want = std::max(s.known_classes + 2, s.dim / 2);
  return std::min(want, s.dim - 1);
}

}  // namespace

void validate_synthetic_spec(const SyntheticSpec& s) {
  if (s.known_classes < 2) throw std::invalid_argument("degenerate spec: K < 2");
  if (s.dim < 2) throw std::invalid_argument("degenerate spec: d < 2");
  const auto id_dim = effective_id_dim(s);
  if (id_dim < s.known_classes) throw std::invalid_argument("degenerate spec: id_dim < K");
  if (id_dim >= s.dim) throw std::invalid_argument("degenerate spec: id_dim must be < d");
  if (!(s.cluster_scale > 0.0)) throw std::invalid_argument("degenerate spec: sigma must be > 0");
  if (s.residual_noise < 0.0) throw std::invalid_argument("degenerate spec: residual_noise < 0");
  if (!(s.prototype_radius > 0.0)) throw std::invalid_argument("degenerate spec: radius <= 0");
  if (s.offset_magnitude < 0.0) throw std::invalid_argument("degenerate spec: offset magnitude < 0");
  if (s.in_subspace_fraction < 0.0 || s.in_subspace_fraction > 1.0) {
    throw std::invalid_argument("degenerate spec: in-subspace fraction outside [0,1]");
  }
  if (s.diffuse_fraction < 0.0 || s.diffuse_fraction > 1.0 || !(s.diffuse_scale > 0.0)) {
    throw std::invalid_argument("degenerate spec: diffuse parameters out of range");
  }
  if (s.train_per_class < 2 || s.test_per_class < 1) {
    throw std::invalid_argument("degenerate spec: too few samples per class");
  }
  if (s.unknown_classes < 1 || s.unknown_per_class < 1) {
    throw std::invalid_argument("degenerate spec: no unknown samples");
  }
  if (s.far_ood_count > 0 && !(s.far_ood_scale > 0.0)) {
    throw std::invalid_argument("degenerate spec: far_ood_scale must be > 0");
  }
}

namespace {

using Vec = std::vector<double>;

// Orthonormal basis of R^d from Gaussian draws (modified Gram-Schmidt).
std::vector<Vec> random_orthonormal_basis(std::uint32_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> basis;
  while (basis.size() < d) {
    Vec v(d);
    for (double& x : v) x = normal(rng);
    for (const Vec& b : basis) {
      double dot = 0.0;
      for (std::uint32_t i = 0; i < d; ++i) dot += v[i] * b[i];
      for (std::uint32_t i = 0; i < d; ++i) v[i] -= dot * b[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

// Random unit vector in the span of basis[first, last).
Vec random_unit_in(const std::vector<Vec>& basis, std::size_t first, std::size_t last,
                   std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t d = basis.front().size();
  Vec v(d, 0.0);
  double norm2 = 0.0;
  std::vector<double> coef(last - first);
  for (double& c : coef) {
    c = normal(rng);
    norm2 += c * c;
  }
  const double norm = std::sqrt(norm2);
  for (std::size_t j = first; j < last; ++j) {
    const double c = coef[j - first] / norm;
    for (std::size_t i = 0; i < d; ++i) v[i] += c * basis[j][i];
  }
  return v;
}

struct Geometry {
  std::uint32_t d = 0;
  std::uint32_t id_dim = 0;
  std::vector<Vec> basis;  // first id_dim vectors span the ID subspace
  std::vector<Vec> prototypes;
};

class SampleSource {
 public:
  SampleSource(const SyntheticSpec& spec, const Geometry& geo, std::mt19937_64& rng)
      : spec_(spec), geo_(geo), rng_(rng) {}

  // center + within-class spread inside the ID subspace + residual noise.
  Vec draw_around(const Vec& center) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double scale = spec_.cluster_scale;
    if (spec_.diffuse_fraction > 0.0 && unit(rng_) < spec_.diffuse_fraction) {
      scale *= spec_.diffuse_scale;
    }
    Vec x = center;
    for (std::uint32_t j = 0; j < geo_.d; ++j) {
      const double s = j < geo_.id_dim ? scale : spec_.residual_noise;
      const double g = normal(rng_) * s;
      for (std::uint32_t i = 0; i < geo_.d; ++i) x[i] += g * geo_.basis[j][i];
    }
    return x;
  }

 private:
  const SyntheticSpec& spec_;
  const Geometry& geo_;
  std::mt19937_64& rng_;
};

void push_sample(FeaturePack& pack, const Vec& x, std::int32_t label, std::string id) {
  for (double v : x) pack.features.push_back(static_cast<float>(v));
  pack.labels.push_back(label);
  pack.ids.push_back(std::move(id));
  ++pack.n;
}

FeaturePack empty_pack(const SyntheticSpec& spec) {
  FeaturePack p;
  p.d = spec.dim;
  p.known_class_count = spec.known_classes;
  return p;
}

std::string make_id(const char* role, const char* prefix, std::uint32_t group,
                    std::uint32_t index) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s/%s%03u/%05u", role, prefix, group, index);
  return buf;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  validate_synthetic_spec(spec);
  std::mt19937_64 rng(spec.seed);

  Geometry geo;
  geo.d = spec.dim;
  geo.id_dim = effective_id_dim(spec);
  geo.basis = random_orthonormal_basis(spec.dim, rng);
  for (std::uint32_t c = 0; c < spec.known_classes; ++c) {
    Vec mu(spec.dim);
    for (std::uint32_t i = 0; i < spec.dim; ++i) mu[i] = spec.prototype_radius * geo.basis[c][i];
    geo.prototypes.push_back(std::move(mu));
  }
  SampleSource source(spec, geo, rng);

  SyntheticDataset out;
  auto generate_known = [&](SplitRole role, std::uint32_t per_class) {
    FeaturePack pack = empty_pack(spec);
    for (std::uint32_t c = 0; c < spec.known_classes; ++c) {
      for (std::uint32_t i = 0; i < per_class; ++i) {
        push_sample(pack, source.draw_around(geo.prototypes[c]), static_cast<std::int32_t>(c),
                    make_id(role_name(role), "c", c, i));
      }
    }
    out.packs.emplace(role_name(role), std::move(pack));
  };
  generate_known(SplitRole::KnownTrain, spec.train_per_class);
  if (spec.calib_per_class > 0) generate_known(SplitRole::KnownCalib, spec.calib_per_class);
  generate_known(SplitRole::KnownTest, spec.test_per_class);

  // In-subspace offsets use the non-prototype ID directions when available, so
  // they move a sample off its class without changing which class it resembles.
  const std::size_t in_first = geo.id_dim > spec.known_classes ? spec.known_classes : 0;
  const double f = spec.in_subspace_fraction;
  FeaturePack unknown = empty_pack(spec);
  for (std::uint32_t u = 0; u < spec.unknown_classes; ++u) {
    const Vec& anchor = geo.prototypes[u % spec.known_classes];
    const Vec in = random_unit_in(geo.basis, in_first, geo.id_dim, rng);
    const Vec orth = random_unit_in(geo.basis, geo.id_dim, spec.dim, rng);
    Vec center = anchor;
    for (std::uint32_t i = 0; i < spec.dim; ++i) {
      center[i] += spec.offset_magnitude * (std::sqrt(f) * in[i] + std::sqrt(1.0 - f) * orth[i]);
    }
    for (std::uint32_t i = 0; i < spec.unknown_per_class; ++i) {
      push_sample(unknown, source.draw_around(center), kUnknownLabel,
                  make_id("unknown_test", "u", u, i));
    }
  }
  out.packs.emplace(role_name(SplitRole::UnknownTest), std::move(unknown));

  if (spec.far_ood_count > 0) {
    std::normal_distribution<double> wide(0.0, spec.far_ood_scale);
    FeaturePack far = empty_pack(spec);
    for (std::uint32_t i = 0; i < spec.far_ood_count; ++i) {
      Vec x(spec.dim);
      for (double& v : x) v = wide(rng);
      push_sample(far, x, kUnknownLabel, make_id("far_ood", "f", 0, i));
    }
    out.packs.emplace(role_name(SplitRole::FarOod), std::move(far));
  }

  out.manifest.known_class_count = spec.known_classes;
  out.manifest.encoder = spec.encoder;
  out.manifest.seed = spec.seed;
  for (const auto& [role, pack] : out.packs) out.manifest.splits[role] = role + ".egfp";
  return out;
}

DatasetManifest write_dataset(SyntheticDataset dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest& m = dataset.manifest;
  m.checksums.clear();
  for (const auto& [role, pack] : dataset.packs) {
    const auto& rel = m.splits.at(role);
    const auto bytes = encode_pack(pack);
    save_pack(pack, dir / rel);
    m.checksums[rel] = sha256_hex(bytes);
  }
  m.base_dir = dir;
  save_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace egur::store
