#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "egur/matrix.hpp"

namespace egur::store {

inline constexpr std::int32_t kUnknownLabel = -1;

// Feature pack: n embeddings of dimension d with labels, optional closed-set
// logits over K known classes, and opaque sample ids.
//
// On disk (all little-endian):
//   "EGFP" | u32 version=1 | u64 n | u64 d | u32 K | u32 flags (bit0: logits)
//   f32 features[n*d] | i32 labels[n] | f32 logits[n*K] (if flagged)
//   u32 id_count | { u32 byte_len, utf8 bytes }[id_count]
struct FeaturePack {
  std::uint64_t n = 0;
  std::uint64_t d = 0;
  std::uint32_t known_class_count = 0;
  std::vector<float> features;             // n * d, row-major
  std::vector<std::int32_t> labels;        // n
  std::optional<std::vector<float>> logits;  // n * K
  std::vector<std::string> ids;            // n

  bool has_logits() const { return logits.has_value(); }
  std::span<const float> feature_row(std::size_t i) const {
    return {features.data() + i * d, static_cast<std::size_t>(d)};
  }

  friend bool operator==(const FeaturePack&, const FeaturePack&) = default;
};

inline constexpr std::uint32_t kPackVersion = 1;
inline constexpr std::uint32_t kFlagLogits = 1u;

// Throws DataError describing the first violated invariant.
void validate_pack(const FeaturePack& pack);

std::vector<std::uint8_t> encode_pack(const FeaturePack& pack);
FeaturePack decode_pack(const std::vector<std::uint8_t>& bytes);

void save_pack(const FeaturePack& pack, const std::filesystem::path& path);
FeaturePack load_pack(const std::filesystem::path& path);

// Features widened to double, optionally L2-normalized per row.
Matrix to_matrix(const FeaturePack& pack, bool normalize);

// Rows [begin, end) or an arbitrary index subset, preserving order.
FeaturePack select_rows(const FeaturePack& pack, const std::vector<std::size_t>& rows);

// Stratum used for class-stratified resampling of unknowns: the id up to its
// last '/', or the whole id when it has no separator.
std::string stratum_of(const std::string& sample_id);

// ---------------------------------------------------------------------------
// Manifest

enum class SplitRole { KnownTrain, KnownCalib, KnownTest, UnknownTest, FarOod };

const char* role_name(SplitRole role);
std::optional<SplitRole> parse_role(const std::string& name);
bool is_known_role(SplitRole role);

struct DatasetManifest {
  std::uint32_t known_class_count = 0;
  std::map<std::string, std::string> splits;     // role name -> relative path
  std::map<std::string, std::string> checksums;  // relative path -> hex sha256
  std::string encoder;
  std::uint64_t seed = 0;
  // Directory the manifest was read from; relative paths resolve against it.
  std::filesystem::path base_dir;

  bool has_role(SplitRole role) const { return splits.count(role_name(role)) != 0; }
  std::filesystem::path resolve(SplitRole role) const;

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.known_class_count == b.known_class_count && a.splits == b.splits &&
           a.checksums == b.checksums && a.encoder == b.encoder && a.seed == b.seed;
  }
};

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text,
                                   const std::filesystem::path& base_dir);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct Diagnostic {
  std::string role;
  std::string path;
  std::string message;
};

struct ValidateOptions {
  // The CLI may carve known_calib from known_train, in which case the
  // manifest is allowed to omit it.
  bool require_calib = true;
};

std::vector<Diagnostic> validate_manifest(const DatasetManifest& manifest,
                                          ValidateOptions options = {});

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic near-known-unknown generator

struct SyntheticSpec {
  std::uint32_t known_classes = 5;
  std::uint32_t train_per_class = 40;
  std::uint32_t calib_per_class = 20;
  std::uint32_t test_per_class = 20;
  std::uint32_t dim = 16;
  // Dimension of the ID subspace holding prototypes and within-class spread;
  // 0 picks max(K + 2, dim / 2), capped at dim - 1.
  std::uint32_t id_dim = 0;
  double prototype_radius = 1.0;
  double cluster_scale = 0.05;      // per-coordinate within-class std (sigma)
  double residual_noise = 0.01;     // per-coordinate std outside the ID subspace
  // Within-class density heterogeneity: this fraction of samples is drawn
  // with cluster_scale * diffuse_scale.
  double diffuse_fraction = 0.0;
  double diffuse_scale = 1.0;
  // Near-known unknowns: anchored at a known prototype and displaced by
  // offset_magnitude along a per-unknown-class direction whose squared
  // length is split in_subspace_fraction : (1 - in_subspace_fraction)
  // between the ID subspace and its orthogonal complement.
  std::uint32_t unknown_classes = 5;
  std::uint32_t unknown_per_class = 20;
  double offset_magnitude = 0.5;
  double in_subspace_fraction = 0.5;
  std::uint32_t far_ood_count = 0;
  double far_ood_scale = 1.0;  // per-coordinate std of the isotropic far split
  std::uint64_t seed = 0;
  std::string encoder = "synthetic";

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

std::string synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const std::string& text);

// Throws std::invalid_argument on a degenerate spec.
void validate_synthetic_spec(const SyntheticSpec& spec);

struct SyntheticDataset {
  DatasetManifest manifest;  // paths are file names relative to the output dir
  std::map<std::string, FeaturePack> packs;  // role name -> pack
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// Writes every pack plus manifest.json into dir and fills checksums.
DatasetManifest write_dataset(SyntheticDataset dataset, const std::filesystem::path& dir);

}  // namespace egur::store
