#pragma once

#include <vector>

#include <torch/torch.h>

#include "farseg/layers.hpp"
#include "farseg/level_map.hpp"

namespace farseg {

struct DecoderConfig {
  int64_t in_channels = 256;
  int64_t out_channels = 128;
  int64_t num_classes = 16;

  void validate() const;
};

/// 3x3 conv-BN-ReLU, optionally followed by 2x bilinear upsampling.
class UpsampleUnitImpl : public torch::nn::Module {
 public:
  UpsampleUnitImpl(int64_t in_channels, int64_t out_channels, bool upsample);
  torch::Tensor forward(const torch::Tensor& x);
  bool upsamples() const { return upsample_; }

 private:
  ConvBnRelu transform_{nullptr};
  bool upsample_;
};
TORCH_MODULE(UpsampleUnit);

/// Brings every pyramid level to stride 4, averages them, classifies, then upsamples 4x.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(DecoderConfig cfg);

  /// Level i gets i - 2 upsampling units (a single plain unit for level 2).
  torch::Tensor decode_level(const torch::Tensor& features, int level);

  /// Pointwise mean over levels -> 1x1 classifier -> 4x bilinear upsampling.
  torch::Tensor aggregate(const LevelMap<torch::Tensor>& decoded);

  torch::Tensor forward(const LevelMap<torch::Tensor>& features);

  int num_upsampling_units(int level) const;
  int num_units(int level) const;
  const DecoderConfig& config() const { return cfg_; }
  torch::nn::Conv2d& classifier() { return classifier_; }

 private:
  DecoderConfig cfg_;
  std::vector<std::vector<UpsampleUnit>> units_;
  torch::nn::Conv2d classifier_{nullptr};
};
TORCH_MODULE(Decoder);

/// Bilinear resize with half-pixel (non corner-aligned) sampling.
torch::Tensor bilinear_resize(const torch::Tensor& x, int64_t height, int64_t width);

}  // namespace farseg
