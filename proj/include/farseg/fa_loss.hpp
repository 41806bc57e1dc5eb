#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace farseg {

enum class Annealing { kNone, kLinear, kPoly, kCosine };

std::string to_string(Annealing kind);
Annealing annealing_from_string(const std::string& name);

/// Foreground-aware loss settings. gamma = 0 reduces the loss to plain cross entropy.
struct FaLossConfig {
  double gamma = 2.0;
  Annealing annealing = Annealing::kCosine;
  int64_t annealing_step = 10000;
  double decay_factor = 0.9;
  bool normalize = true;
  std::optional<int64_t> ignore_label = 255;

  void validate() const;
};

void to_json(nlohmann::json& j, const FaLossConfig& cfg);
void from_json(const nlohmann::json& j, FaLossConfig& cfg);

struct PixelCrossEntropy {
  torch::Tensor loss;    // B x H x W, -log p of the true class, 0 on ignored pixels
  torch::Tensor p_true;  // B x H x W, softmax probability of the true class
  torch::Tensor valid;   // B x H x W bool, false on ignored pixels
  int64_t num_valid = 0;
};

struct LossBreakdown {
  torch::Tensor total;      // scalar, mean of per_pixel over valid pixels
  torch::Tensor per_pixel;  // B x H x W, m_i * l_i (0 on ignored pixels)
  torch::Tensor weights;    // B x H x W, m_i
  torch::Tensor ce;         // B x H x W, l_i
  double z_value = 1.0;
  double zeta = 1.0;
  int64_t num_valid = 0;
};

/// Throws DataError (with b, y, x of the first offender) when a label is outside
/// [0, K) and is not the ignore label.
void validate_labels(const torch::Tensor& labels, int64_t num_classes, std::optional<int64_t> ignore_label);

PixelCrossEntropy per_pixel_ce(const torch::Tensor& logits, const torch::Tensor& labels,
                               std::optional<int64_t> ignore_label = 255);

/// (1 - p)^gamma.
torch::Tensor focal_weight(const torch::Tensor& p_true, double gamma);

/// Z = sum(w * l) / sum(l) over valid pixels, or 1 when sum(l) < 1e-12.
double normalization_constant(const torch::Tensor& weights, const torch::Tensor& loss,
                              const torch::Tensor& valid);

inline constexpr double kZFloor = 1e-12;

/// Annealing value in [0, 1]; t is clamped to annealing_step. kNone is identically 0.
double annealing(int64_t step, const FaLossConfig& cfg);

/// Dynamically weighted cross entropy:
///   m_i = w_i / Z + zeta(t) * (1 - w_i / Z),   total = sum(m_i * l_i) / #valid.
/// Z comes from the current batch and is a constant for autograd. `fixed_z`
/// overrides it (used for finite-difference checks). With normalize = false, Z = 1.
LossBreakdown fa_loss(const torch::Tensor& logits, const torch::Tensor& labels, const FaLossConfig& cfg,
                      int64_t step, std::optional<double> fixed_z = std::nullopt);

}  // namespace farseg
