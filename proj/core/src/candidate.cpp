#include "egur/candidate.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>

#include "egur/error.hpp"
#include "json.hpp"

namespace egur::candidate {
namespace {

// Numerically stable log-sum-exp of z / temperature.
double log_sum_exp(std::span<const double> z, double temperature) {
  double mx = -INFINITY;
  for (double v : z) mx = std::max(mx, v / temperature);
  double sum = 0.0;
  for (double v : z) sum += std::exp(v / temperature - mx);
  return mx + std::log(sum);
}

}  // namespace

double probe_objective(std::span<const double> params, const Matrix& x,
                       std::span<const std::int32_t> labels, std::uint32_t num_classes,
                       double l2, std::vector<double>* gradient) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const std::size_t k = num_classes;
  if (params.size() != k * d + k) throw std::invalid_argument("parameter size mismatch");
  if (labels.size() != n) throw std::invalid_argument("label count mismatch");

  const double* w = params.data();
  const double* b = params.data() + k * d;
  if (gradient) gradient->assign(params.size(), 0.0);

  std::vector<double> z(k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      double s = b[c];
      for (std::size_t j = 0; j < d; ++j) s += w[c * d + j] * xi[j];
      z[c] = s;
    }
    const double lse = log_sum_exp(z, 1.0);
    const auto y = static_cast<std::size_t>(labels[i]);
    loss += lse - z[y];
    if (gradient) {
      for (std::size_t c = 0; c < k; ++c) {
        const double residual = std::exp(z[c] - lse) - (c == y ? 1.0 : 0.0);
        double* gw = gradient->data() + c * d;
        for (std::size_t j = 0; j < d; ++j) gw[j] += residual * xi[j];
        (*gradient)[k * d + c] += residual;
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  double w2 = 0.0;
  for (std::size_t i = 0; i < k * d; ++i) w2 += w[i] * w[i];
  loss += 0.5 * l2 * w2;
  if (gradient) {
    for (auto& g : *gradient) g *= inv_n;
    for (std::size_t i = 0; i < k * d; ++i) (*gradient)[i] += l2 * w[i];
  }
  return loss;
}

LinearProbe train_linear_probe(const Matrix& x, std::span<const std::int32_t> labels,
                               std::uint32_t num_classes, const ProbeHyper& hyper) {
  if (num_classes < 2) throw std::invalid_argument("probe needs at least two classes");
  if (x.rows() != labels.size()) throw std::invalid_argument("label count mismatch");
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::int32_t y : labels) {
    if (y < 0 || static_cast<std::uint32_t>(y) >= num_classes) {
      throw std::invalid_argument("probe training labels must be known classes");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  std::size_t present = 0;
  for (auto c : counts) present += c > 0;
  if (present < 2) throw std::invalid_argument("single-class input: probe needs >= 2 classes");
  if (!(hyper.step_size > 0.0) || hyper.l2 < 0.0) {
    throw std::invalid_argument("probe step size must be > 0 and L2 >= 0");
  }

  const std::size_t d = x.cols();
  const std::size_t k = num_classes;
  std::vector<double> params(k * d + k, 0.0);
  std::mt19937_64 rng(hyper.seed);
  std::normal_distribution<double> init(0.0, 0.01);
  for (std::size_t i = 0; i < k * d; ++i) params[i] = init(rng);

  LinearProbe probe;
  probe.num_classes = num_classes;
  probe.dim = static_cast<std::uint32_t>(d);
  probe.hyper = hyper;
  probe.loss_history.reserve(hyper.epochs);

  std::vector<double> grad;
  for (std::uint32_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    const double loss = probe_objective(params, x, labels, num_classes, hyper.l2, &grad);
    if (!std::isfinite(loss)) throw DataError("non-finite probe loss: step size diverges");
    probe.loss_history.push_back(loss);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= hyper.step_size * grad[i];
  }

  probe.weights.resize(k * d);
  probe.bias.resize(k);
  for (std::size_t i = 0; i < k * d; ++i) probe.weights[i] = static_cast<float>(params[i]);
  for (std::size_t c = 0; c < k; ++c) probe.bias[c] = static_cast<float>(params[k * d + c]);

  std::vector<double> stored(params.size());
  for (std::size_t i = 0; i < k * d; ++i) stored[i] = probe.weights[i];
  for (std::size_t c = 0; c < k; ++c) stored[k * d + c] = probe.bias[c];
  probe.final_loss = probe_objective(stored, x, labels, num_classes, hyper.l2, nullptr);
  if (!std::isfinite(probe.final_loss)) throw DataError("non-finite probe loss: step size diverges");
  return probe;
}

Matrix probe_logits(const LinearProbe& probe, const Matrix& x) {
  if (x.cols() != probe.dim) throw std::invalid_argument("dimension mismatch between probe and features");
  const std::size_t k = probe.num_classes;
  const std::size_t d = probe.dim;
  Matrix out(x.rows(), k);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      double s = probe.bias[c];
      for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(probe.weights[c * d + j]) * xi[j];
      out(i, c) = s;
    }
  }
  return out;
}

CandidateOutput candidate_from_logits(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (logits.empty()) throw std::invalid_argument("empty logit row");
  CandidateOutput out;
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  const double top = logits[best] / temperature;
  out.probabilities.resize(logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out.probabilities[c] = std::exp(logits[c] / temperature - top);
    sum += out.probabilities[c];
  }
  for (double& p : out.probabilities) p /= sum;
  out.candidate = static_cast<std::int32_t>(best);
  out.confidence = out.probabilities[best];
  return out;
}

std::vector<CandidateOutput> predict_candidates(const Matrix& logits, double temperature) {
  std::vector<CandidateOutput> out;
  out.reserve(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    out.push_back(candidate_from_logits(logits.row(i), temperature));
  }
  return out;
}

std::vector<CandidateOutput> prototype_softmax_fallback(const Matrix& prototypes, const Matrix& x,
                                                        double temperature) {
  if (prototypes.rows() < 2) throw std::invalid_argument("missing prototypes");
  if (prototypes.cols() != x.cols()) throw std::invalid_argument("dimension mismatch");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  std::vector<CandidateOutput> out;
  out.reserve(x.rows());
  std::vector<double> z(prototypes.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t c = 0; c < prototypes.rows(); ++c) {
      z[c] = -euclidean_distance(x.row(i), prototypes.row(c));
    }
    out.push_back(candidate_from_logits(z, temperature));
  }
  return out;
}

// Probe file: "EGLP" | u32 version | u64 header_len | JSON header |
// f32 weights[K*d] | f32 bias[K]
namespace {

constexpr char kProbeMagic[4] = {'E', 'G', 'L', 'P'};
constexpr std::uint32_t kProbeVersion = 1;

template <typename T>
void append(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

std::vector<std::uint8_t> encode_probe(const LinearProbe& probe) {
  nlohmann::json h;
  h["num_classes"] = probe.num_classes;
  h["dim"] = probe.dim;
  h["epochs"] = probe.hyper.epochs;
  h["step_size"] = probe.hyper.step_size;
  h["l2"] = probe.hyper.l2;
  h["seed"] = probe.hyper.seed;
  h["final_loss"] = probe.final_loss;
  h["loss_history"] = probe.loss_history;
  const std::string header = h.dump();

  std::vector<std::uint8_t> out(kProbeMagic, kProbeMagic + 4);
  append(out, kProbeVersion);
  append(out, static_cast<std::uint64_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (float w : probe.weights) append(out, w);
  for (float b : probe.bias) append(out, b);
  return out;
}

LinearProbe decode_probe(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kProbeMagic, 4) != 0) {
    throw DataError("bad probe magic");
  }
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (version != kProbeVersion) throw DataError("probe version mismatch");
  if (header_len > bytes.size() - 16) throw DataError("truncated probe header");

  LinearProbe probe;
  try {
    const auto h = nlohmann::json::parse(bytes.begin() + 16,
                                         bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    probe.num_classes = h.at("num_classes").get<std::uint32_t>();
    probe.dim = h.at("dim").get<std::uint32_t>();
    probe.hyper.epochs = h.at("epochs").get<std::uint32_t>();
    probe.hyper.step_size = h.at("step_size").get<double>();
    probe.hyper.l2 = h.at("l2").get<double>();
    probe.hyper.seed = h.at("seed").get<std::uint64_t>();
    probe.final_loss = h.at("final_loss").get<double>();
    probe.loss_history = h.value("loss_history", std::vector<double>{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed probe header: ") + e.what());
  }
  const std::size_t k = probe.num_classes;
  const std::size_t expect = 16 + header_len + (k * probe.dim + k) * sizeof(float);
  if (bytes.size() != expect) throw DataError("probe payload size mismatch");
  const std::uint8_t* p = bytes.data() + 16 + header_len;
  probe.weights.resize(k * probe.dim);
  probe.bias.resize(k);
  std::memcpy(probe.weights.data(), p, probe.weights.size() * sizeof(float));
  std::memcpy(probe.bias.data(), p + probe.weights.size() * sizeof(float), k * sizeof(float));
  for (float v : probe.weights) {
    if (!std::isfinite(v)) throw DataError("non-finite probe weight");
  }
  return probe;
}

void save_probe(const LinearProbe& probe, const std::filesystem::path& path) {
  const auto bytes = encode_probe(probe);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

LinearProbe load_probe(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_probe(bytes);
}

}  // namespace egur::candidate
