#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egur/matrix.hpp"

namespace egur::candidate {

struct ProbeHyper {
  std::uint32_t epochs = 300;
  double step_size = 0.5;
  double l2 = 1e-4;
  std::uint64_t seed = 0;

  friend bool operator==(const ProbeHyper&, const ProbeHyper&) = default;
};

// Multinomial logistic regression over K known classes. Parameters are kept
// at f32 precision so a serialized probe reproduces predictions exactly.
struct LinearProbe {
  std::uint32_t num_classes = 0;
  std::uint32_t dim = 0;
  std::vector<float> weights;  // K x d, row-major
  std::vector<float> bias;     // K
  ProbeHyper hyper;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // one entry per epoch, before the update

  friend bool operator==(const LinearProbe&, const LinearProbe&) = default;
};

// Mean cross-entropy + (l2 / 2) * ||W||^2 and its gradient. `params` holds
// K*d weights followed by K biases; `gradient` is resized to match.
double probe_objective(std::span<const double> params, const Matrix& x,
                       std::span<const std::int32_t> labels, std::uint32_t num_classes,
                       double l2, std::vector<double>* gradient);

// Full-batch gradient descent. Throws std::invalid_argument for fewer than two
// classes and DataError when the loss diverges.
LinearProbe train_linear_probe(const Matrix& x, std::span<const std::int32_t> labels,
                               std::uint32_t num_classes, const ProbeHyper& hyper);

Matrix probe_logits(const LinearProbe& probe, const Matrix& x);

struct CandidateOutput {
  std::int32_t candidate = 0;
  double confidence = 0.0;
  std::vector<double> probabilities;
};

// Softmax at `temperature` per row; argmax ties go to the lowest class id.
std::vector<CandidateOutput> predict_candidates(const Matrix& logits, double temperature = 1.0);
CandidateOutput candidate_from_logits(std::span<const double> logits, double temperature = 1.0);

// logits = -||x - mu_c|| / temperature. Used only when no probe or logits exist.
std::vector<CandidateOutput> prototype_softmax_fallback(const Matrix& prototypes, const Matrix& x,
                                                        double temperature);

std::vector<std::uint8_t> encode_probe(const LinearProbe& probe);
LinearProbe decode_probe(const std::vector<std::uint8_t>& bytes);
void save_probe(const LinearProbe& probe, const std::filesystem::path& path);
LinearProbe load_probe(const std::filesystem::path& path);

}  // namespace egur::candidate
