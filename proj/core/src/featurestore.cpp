#include "egur/featurestore.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "egur/error.hpp"

namespace egur::store {
namespace {

static_assert(std::endian::native == std::endian::little,
              "pack encoding assumes a little-endian host");

constexpr char kMagic[4] = {'E', 'G', 'F', 'P'};

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out_.insert(out_.end(), p, p + sizeof(T));
  }

  template <typename T>
  void put_array(const std::vector<T>& values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    out_.insert(out_.end(), p, p + values.size() * sizeof(T));
  }

  void put_bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + size);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  void need(std::size_t bytes) const {
    if (in_.size() - pos_ < bytes) throw DataError("truncated payload");
  }

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <typename T>
  std::vector<T> get_array(std::uint64_t count) {
    if (count > (in_.size() - pos_) / sizeof(T)) throw DataError("truncated payload");
    std::vector<T> values(count);
    std::memcpy(values.data(), in_.data() + pos_, count * sizeof(T));
    pos_ += count * sizeof(T);
    return values;
  }

  std::string get_string(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  bool at_end() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

void validate_pack(const FeaturePack& pack) {
  if (pack.n < 1) throw DataError("pack must contain at least one sample");
  if (pack.d < 2) throw DataError("feature dimension must be >= 2");
  if (pack.features.size() != pack.n * pack.d) throw DataError("feature block size mismatch");
  if (pack.labels.size() != pack.n) throw DataError("label count mismatch");
  if (pack.ids.size() != pack.n) throw DataError("id count mismatch");
  for (float v : pack.features) {
    if (!std::isfinite(v)) throw DataError("non-finite feature");
  }
  for (std::int32_t label : pack.labels) {
    if (label < kUnknownLabel ||
        (label >= 0 && static_cast<std::uint32_t>(label) >= pack.known_class_count)) {
      throw DataError("label out of range: " + std::to_string(label));
    }
  }
  if (pack.logits) {
    if (pack.known_class_count < 2) throw DataError("logits require K >= 2");
    if (pack.logits->size() != pack.n * pack.known_class_count) {
      throw DataError("logit block size mismatch");
    }
    for (float v : *pack.logits) {
      if (!std::isfinite(v)) throw DataError("non-finite logit");
    }
  }
}

std::vector<std::uint8_t> encode_pack(const FeaturePack& pack) {
  validate_pack(pack);
  std::vector<std::uint8_t> out;
  Writer w(out);
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kPackVersion);
  w.put<std::uint64_t>(pack.n);
  w.put<std::uint64_t>(pack.d);
  w.put<std::uint32_t>(pack.known_class_count);
  w.put<std::uint32_t>(pack.logits ? kFlagLogits : 0u);
  w.put_array(pack.features);
  w.put_array(pack.labels);
  if (pack.logits) w.put_array(*pack.logits);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(pack.ids.size()));
  for (const auto& id : pack.ids) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(id.size()));
    w.put_bytes(id.data(), id.size());
  }
  return out;
}

FeaturePack decode_pack(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError("bad magic");
  r.get<std::uint32_t>();  // magic, already checked
  if (r.get<std::uint32_t>() != kPackVersion) throw DataError("version mismatch");

  FeaturePack pack;
  pack.n = r.get<std::uint64_t>();
  pack.d = r.get<std::uint64_t>();
  pack.known_class_count = r.get<std::uint32_t>();
  const auto flags = r.get<std::uint32_t>();
  if (pack.d != 0 && pack.n > bytes.size() / pack.d) throw DataError("truncated payload");
  pack.features = r.get_array<float>(pack.n * pack.d);
  pack.labels = r.get_array<std::int32_t>(pack.n);
  if (flags & kFlagLogits) pack.logits = r.get_array<float>(pack.n * pack.known_class_count);
  const auto id_count = r.get<std::uint32_t>();
  if (id_count != pack.n) throw DataError("size mismatch: id count differs from n");
  pack.ids.reserve(id_count);
  for (std::uint32_t i = 0; i < id_count; ++i) {
    const auto len = r.get<std::uint32_t>();
    pack.ids.push_back(r.get_string(len));
  }
  if (!r.at_end()) throw DataError("size mismatch: trailing bytes after id block");
  validate_pack(pack);
  return pack;
}

void save_pack(const FeaturePack& pack, const std::filesystem::path& path) {
  const auto bytes = encode_pack(pack);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

FeaturePack load_pack(const std::filesystem::path& path) {
  try {
    return decode_pack(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
}

Matrix to_matrix(const FeaturePack& pack, bool normalize) {
  Matrix m(pack.n, pack.d);
  for (std::size_t i = 0; i < pack.n; ++i) {
    auto dst = m.row(i);
    const auto src = pack.feature_row(i);
    for (std::size_t j = 0; j < pack.d; ++j) dst[j] = static_cast<double>(src[j]);
    if (normalize) l2_normalize(dst);
  }
  return m;
}

FeaturePack select_rows(const FeaturePack& pack, const std::vector<std::size_t>& rows) {
  FeaturePack out;
  out.n = rows.size();
  out.d = pack.d;
  out.known_class_count = pack.known_class_count;
  out.features.reserve(rows.size() * pack.d);
  if (pack.logits) out.logits.emplace();
  for (std::size_t r : rows) {
    if (r >= pack.n) throw std::out_of_range("row index out of range");
    const auto src = pack.feature_row(r);
    out.features.insert(out.features.end(), src.begin(), src.end());
    out.labels.push_back(pack.labels[r]);
    out.ids.push_back(pack.ids[r]);
    if (pack.logits) {
      const auto k = pack.known_class_count;
      out.logits->insert(out.logits->end(), pack.logits->begin() + r * k,
                         pack.logits->begin() + (r + 1) * k);
    }
  }
  return out;
}

std::string stratum_of(const std::string& sample_id) {
  const auto pos = sample_id.rfind('/');
  return pos == std::string::npos ? sample_id : sample_id.substr(0, pos);
}

}  // namespace egur::store
