#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "farseg/layers.hpp"
#include "farseg/level_map.hpp"

namespace farseg {

/// Residual backbone layout. Stage i (0-based) produces C_{i+2}.
struct BackboneConfig {
  std::string preset = "tiny";
  std::vector<int64_t> widths{16, 32, 64, 128};
  std::vector<int64_t> blocks{1, 1, 1, 1};
  int64_t stem_width = 16;
  int64_t stem_kernel = 3;
  bool bottleneck = false;

  static BackboneConfig tiny();
  /// ResNet-50 layout (bottleneck blocks 3-4-6-3, widths 256..2048).
  static BackboneConfig resnet50();
  /// Resolve a named preset; throws ConfigError for unknown names.
  static BackboneConfig from_preset(const std::string& name);

  void validate() const;
};

/// Backbone outputs C_2..C_5 at strides 4, 8, 16, 32.
struct BackboneFeatures {
  LevelMap<torch::Tensor> levels;
  int64_t height = 0;
  int64_t width = 0;
};

/// FPN outputs P_2..P_5, each with `channels` channels.
struct FeaturePyramid {
  LevelMap<torch::Tensor> levels;
  int64_t channels = 0;
};

/// Globally pooled C_5 (C_6 in FarSeg terms): shape B x c5.
struct SceneContext {
  torch::Tensor c6;
};

/// Throws ShapeError naming the axis when H or W is not a multiple of 32.
void check_input_size(const torch::Tensor& image_batch);

class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int64_t in_channels, int64_t out_channels, int64_t stride, bool bottleneck);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_{nullptr};
  torch::nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(ResidualBlock);

class BackboneImpl : public torch::nn::Module {
 public:
  explicit BackboneImpl(BackboneConfig cfg);

  /// B x 3 x H x W -> {C_2, C_3, C_4, C_5}.
  BackboneFeatures forward(const torch::Tensor& image_batch);

  const BackboneConfig& config() const { return cfg_; }
  int64_t channels(int level) const { return cfg_.widths.at(level - kMinLevel); }

 private:
  BackboneConfig cfg_;
  torch::nn::Sequential stem_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(Backbone);

/// Top-down pathway with 1x1 lateral connections:
///   P_5 = lateral(C_5),  P_i = lateral(C_i) + nearest_up2(P_{i+1}).
class FpnImpl : public torch::nn::Module {
 public:
  FpnImpl(const std::vector<int64_t>& in_channels, int64_t channels);

  FeaturePyramid forward(const BackboneFeatures& features);

  torch::nn::Conv2d& lateral(int level) { return laterals_.at(level - kMinLevel); }
  int64_t channels() const { return channels_; }

 private:
  int64_t channels_;
  std::vector<torch::nn::Conv2d> laterals_;
};
TORCH_MODULE(Fpn);

/// Spatial mean of every C_5 channel, per image.
SceneContext scene_pool(const BackboneFeatures& features);

}  // namespace farseg
