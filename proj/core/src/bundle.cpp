#include <cstring>
#include <fstream>
#include <iterator>

#include "egur/error.hpp"
#include "egur/pipeline.hpp"
#include "json.hpp"

namespace egur {

using nlohmann::json;

namespace {

constexpr char kBundleMagic[4] = {'E', 'G', 'M', 'B'};
constexpr std::uint32_t kBundleVersion = 1;

template <typename T>
void append(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
void append_section(std::vector<std::uint8_t>& out, const char (&tag)[5], const std::vector<T>& values) {
  out.insert(out.end(), tag, tag + 4);
  append(out, static_cast<std::uint64_t>(values.size() * sizeof(T)));
  const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
  out.insert(out.end(), p, p + values.size() * sizeof(T));
}

json selection_json(const fusion::EvidenceWeightSelection& s) {
  json j;
  j["cv_local"] = s.cv_local;
  j["cv_res"] = s.cv_res;
  j["branch"] = fusion::branch_name(s.branch);
  j["alpha_ka"] = s.alpha_ka ? json(*s.alpha_ka) : json(nullptr);
  j["alpha"] = s.alpha;
  j["grid_known_acc"] = s.grid_known_acc;
  return j;
}

fusion::EvidenceWeightSelection selection_from(const json& j) {
  fusion::EvidenceWeightSelection s;
  s.cv_local = j.at("cv_local").get<double>();
  s.cv_res = j.at("cv_res").get<double>();
  const auto branch = fusion::parse_branch(j.at("branch").get<std::string>());
  if (!branch) throw DataError("bundle: unknown selection branch");
  s.branch = *branch;
  if (!j.at("alpha_ka").is_null()) s.alpha_ka = j.at("alpha_ka").get<double>();
  s.alpha = j.at("alpha").get<double>();
  s.grid_known_acc = j.at("grid_known_acc").get<std::vector<double>>();
  return s;
}

class SectionReader {
 public:
  SectionReader(const std::vector<std::uint8_t>& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::pair<std::string, std::vector<std::uint8_t>> next() {
    if (bytes_.size() - pos_ < 12) throw DataError("bundle: truncated section header");
    std::string tag(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    std::uint64_t len = 0;
    std::memcpy(&len, bytes_.data() + pos_ + 4, 8);
    pos_ += 12;
    if (len > bytes_.size() - pos_) throw DataError("bundle: truncated section " + tag);
    std::vector<std::uint8_t> payload(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                      bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return {tag, std::move(payload)};
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_;
};

template <typename T>
std::vector<T> as_array(const std::vector<std::uint8_t>& payload, std::size_t expected_count,
                        const std::string& tag) {
  if (payload.size() != expected_count * sizeof(T)) throw DataError("bundle: section size mismatch " + tag);
  std::vector<T> out(expected_count);
  std::memcpy(out.data(), payload.data(), payload.size());
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_bundle(const FittedModel& model) {
  json h;
  h["config"] = json::parse(pipeline_config_to_json(model.config));
  h["known_class_count"] = model.known_class_count;
  h["checksums"] = model.checksums;
  h["calib_carved"] = model.calib_carved;
  h["logits_source"] = model.logits_source == LogitsSource::Pack ? "pack" : "probe";
  h["selection"] = selection_json(model.selection);
  const auto& op = model.operating_point;
  h["operating_point"] = {{"target_krr", op.target_krr},
                          {"threshold", op.threshold},
                          {"achieved_krr", op.achieved_krr},
                          {"n_calib", op.n_calib},
                          {"saturated", op.saturated}};
  const auto& ix = model.index;
  h["index"] = {{"num_classes", ix.num_classes}, {"k", ix.k}, {"m", ix.m},
                {"normalize", ix.normalize}, {"n", ix.features.rows()}, {"d", ix.features.cols()}};
  const auto& t = model.thresholds;
  std::vector<int> degenerate(t.support_degenerate.begin(), t.support_degenerate.end());
  h["thresholds"] = {{"support", t.support}, {"support_degenerate", degenerate},
                     {"pooled_support", t.pooled_support}, {"contrast", t.contrast},
                     {"purity", t.purity}, {"margin", t.margin}, {"conflict", t.conflict},
                     {"mask", t.mask.to_string()}, {"global_support", t.global_support}};
  h["subspace"] = {{"dim", model.subspace.dim()}, {"rank", model.subspace.rank},
                   {"retained_variance", model.subspace.retained_variance}};
  h["normalizer"] = {{"p_low", model.normalizer.p_low}, {"p_high", model.normalizer.p_high},
                     {"degenerate", model.normalizer.degenerate}};
  const std::string header = h.dump();

  std::vector<std::uint8_t> out(kBundleMagic, kBundleMagic + 4);
  append(out, kBundleVersion);
  append(out, static_cast<std::uint64_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  append_section(out, "IDXF", ix.features.data());
  append_section(out, "IDXL", ix.labels);
  append_section(out, "PROT", ix.prototypes.data());
  append_section(out, "MEAN", model.subspace.mean);
  append_section(out, "BASE", model.subspace.basis.data());
  append_section(out, "ANCH", std::vector<double>{model.normalizer.low, model.normalizer.high});
  if (model.probe) append_section(out, "PROB", candidate::encode_probe(*model.probe));
  return out;
}

FittedModel decode_bundle(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kBundleMagic, 4) != 0) {
    throw DataError("bundle: bad magic");
  }
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (version != kBundleVersion) throw DataError("bundle: version mismatch");
  if (header_len > bytes.size() - 16) throw DataError("bundle: truncated header");

  FittedModel model;
  std::size_t n = 0, d = 0, dim = 0;
  try {
    const json h = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    model.config = pipeline_config_from_json(h.at("config").dump());
    model.known_class_count = h.at("known_class_count").get<std::uint32_t>();
    model.checksums = h.at("checksums").get<std::map<std::string, std::string>>();
    model.calib_carved = h.at("calib_carved").get<bool>();
    model.logits_source = h.at("logits_source").get<std::string>() == "pack" ? LogitsSource::Pack
                                                                           : LogitsSource::Probe;
    model.selection = selection_from(h.at("selection"));
    const auto& op = h.at("operating_point");
    model.operating_point.target_krr = op.at("target_krr").get<double>();
    model.operating_point.threshold = op.at("threshold").get<double>();
    model.operating_point.achieved_krr = op.at("achieved_krr").get<double>();
    model.operating_point.n_calib = op.at("n_calib").get<std::size_t>();
    model.operating_point.saturated = op.at("saturated").get<bool>();

    const auto& ix = h.at("index");
    model.index.num_classes = ix.at("num_classes").get<std::uint32_t>();
    model.index.k = ix.at("k").get<std::uint32_t>();
    model.index.m = ix.at("m").get<std::uint32_t>();
    model.index.normalize = ix.at("normalize").get<bool>();
    n = ix.at("n").get<std::size_t>();
    d = ix.at("d").get<std::size_t>();

    const auto& t = h.at("thresholds");
    auto& th = model.thresholds;
    th.support = t.at("support").get<std::vector<double>>();
    for (int v : t.at("support_degenerate").get<std::vector<int>>()) th.support_degenerate.push_back(v != 0);
    th.pooled_support = t.at("pooled_support").get<double>();
    th.contrast = t.at("contrast").get<double>();
    th.purity = t.at("purity").get<double>();
    th.margin = t.at("margin").get<double>();
    th.conflict = t.at("conflict").get<double>();
    th.mask = local::CheckMask::parse(t.at("mask").get<std::string>());
    th.global_support = t.at("global_support").get<bool>();

    const auto& s = h.at("subspace");
    dim = s.at("dim").get<std::size_t>();
    model.subspace.rank = s.at("rank").get<std::size_t>();
    model.subspace.retained_variance = s.at("retained_variance").get<double>();
    const auto& nz = h.at("normalizer");
    model.normalizer.p_low = nz.at("p_low").get<double>();
    model.normalizer.p_high = nz.at("p_high").get<double>();
    model.normalizer.degenerate = nz.at("degenerate").get<bool>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bundle: malformed header: ") + e.what());
  }

  const std::size_t K = model.index.num_classes;
  SectionReader reader(bytes, 16 + header_len);
  while (!reader.done()) {
    auto [tag, payload] = reader.next();
    if (tag == "IDXF") {
      model.index.features = Matrix(n, d, as_array<double>(payload, n * d, tag));
    } else if (tag == "IDXL") {
      model.index.labels = as_array<std::int32_t>(payload, n, tag);
    } else if (tag == "PROT") {
      model.index.prototypes = Matrix(K, d, as_array<double>(payload, K * d, tag));
    } else if (tag == "MEAN") {
      model.subspace.mean = as_array<double>(payload, d, tag);
    } else if (tag == "BASE") {
      model.subspace.basis = Matrix(dim, d, as_array<double>(payload, dim * d, tag));
    } else if (tag == "ANCH") {
      const auto a = as_array<double>(payload, 2, tag);
      model.normalizer.low = a[0];
      model.normalizer.high = a[1];
    } else if (tag == "PROB") {
      model.probe = candidate::decode_probe(payload);
    } else {
      throw DataError("bundle: unknown section " + tag);
    }
  }
  if (model.index.labels.size() != n || model.subspace.mean.size() != d) {
    throw DataError("bundle: missing sections");
  }
  if (model.logits_source == LogitsSource::Probe && !model.probe) {
    throw DataError("bundle: probe section missing");
  }
  model.index.members.assign(K, {});
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = model.index.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= K) throw DataError("bundle: index label out of range");
    model.index.members[static_cast<std::size_t>(y)].push_back(i);
  }
  return model;
}

void save_bundle(const FittedModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_bundle(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FittedModel load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open bundle: " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_bundle(bytes);
}

}  // namespace egur
