#include <array>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#include <openssl/evp.h>

#include "egur/error.hpp"
#include "egur/featurestore.hpp"
#include "json.hpp"

namespace egur::store {

using nlohmann::json;

namespace {

constexpr std::array<SplitRole, 5> kAllRoles = {SplitRole::KnownTrain, SplitRole::KnownCalib,
                                                SplitRole::KnownTest, SplitRole::UnknownTest,
                                                SplitRole::FarOod};

std::string to_hex(const unsigned char* digest, unsigned int len) {
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

std::string sha256_raw(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  return to_hex(digest, len);
}

}  // namespace

const char* role_name(SplitRole role) {
  switch (role) {
    case SplitRole::KnownTrain: return "known_train";
    case SplitRole::KnownCalib: return "known_calib";
    case SplitRole::KnownTest: return "known_test";
    case SplitRole::UnknownTest: return "unknown_test";
    case SplitRole::FarOod: return "far_ood";
  }
  return "?";
}

std::optional<SplitRole> parse_role(const std::string& name) {
  for (SplitRole role : kAllRoles) {
    if (name == role_name(role)) return role;
  }
  return std::nullopt;
}

bool is_known_role(SplitRole role) {
  return role == SplitRole::KnownTrain || role == SplitRole::KnownCalib ||
         role == SplitRole::KnownTest;
}

std::filesystem::path DatasetManifest::resolve(SplitRole role) const {
  const auto it = splits.find(role_name(role));
  if (it == splits.end()) throw DataError(std::string("manifest has no split ") + role_name(role));
  std::filesystem::path p(it->second);
  return p.is_absolute() ? p : base_dir / p;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  return sha256_raw(bytes.data(), bytes.size());
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  return sha256_hex(bytes);
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json j;
  j["known_class_count"] = manifest.known_class_count;
  j["splits"] = manifest.splits;
  j["checksums"] = manifest.checksums;
  j["encoder"] = manifest.encoder;
  j["seed"] = manifest.seed;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.known_class_count = j.at("known_class_count").get<std::uint32_t>();
    m.splits = j.at("splits").get<std::map<std::string, std::string>>();
    m.checksums = j.value("checksums", std::map<std::string, std::string>{});
    m.encoder = j.value("encoder", std::string{});
    m.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  m.base_dir = base_dir;
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << manifest_to_json(manifest);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str(), path.parent_path());
}

std::vector<Diagnostic> validate_manifest(const DatasetManifest& manifest,
                                          ValidateOptions options) {
  std::vector<Diagnostic> out;
  auto report = [&](std::string role, std::string path, std::string message) {
    out.push_back({std::move(role), std::move(path), std::move(message)});
  };

  for (SplitRole role : {SplitRole::KnownTrain, SplitRole::KnownCalib, SplitRole::KnownTest,
                         SplitRole::UnknownTest}) {
    if (role == SplitRole::KnownCalib && !options.require_calib) continue;
    if (!manifest.has_role(role)) report(role_name(role), "", "missing required split");
  }
  if (manifest.known_class_count < 2) report("", "", "known_class_count must be >= 2");

  std::unordered_map<std::string, std::string> id_owner;
  std::optional<std::uint64_t> dim;
  for (const auto& [role_str, rel_path] : manifest.splits) {
    const auto role = parse_role(role_str);
    if (!role) {
      report(role_str, rel_path, "unrecognized split role");
      continue;
    }
    const auto path = manifest.resolve(*role);
    if (!std::filesystem::exists(path)) {
      report(role_str, rel_path, "file not found");
      continue;
    }
    const auto sum = manifest.checksums.find(rel_path);
    if (sum == manifest.checksums.end()) {
      report(role_str, rel_path, "no checksum recorded for " + rel_path);
    } else if (sha256_file(path) != sum->second) {
      report(role_str, rel_path, "checksum mismatch for " + rel_path);
    }

    FeaturePack pack;
    try {
      pack = load_pack(path);
    } catch (const DataError& e) {
      report(role_str, rel_path, e.what());
      continue;
    }
    if (pack.known_class_count != manifest.known_class_count) {
      report(role_str, rel_path, "known class count differs from manifest");
    }
    if (dim && *dim != pack.d) report(role_str, rel_path, "feature dimension differs across splits");
    dim = pack.d;

    const bool known = is_known_role(*role);
    for (std::int32_t label : pack.labels) {
      if (known && label == kUnknownLabel) {
        report(role_str, rel_path, "known split contains unknown label");
        break;
      }
      if (!known && label != kUnknownLabel) {
        report(role_str, rel_path, "unknown split contains known label");
        break;
      }
    }
    for (const auto& id : pack.ids) {
      const auto [it, inserted] = id_owner.emplace(id, role_str);
      if (!inserted) {
        report(role_str, rel_path, "sample id " + id + " also appears in " + it->second);
        break;
      }
    }
  }
  return out;
}

}  // namespace egur::store
