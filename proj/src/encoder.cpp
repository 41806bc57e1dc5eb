#include "farseg/encoder.hpp"

#include <sstream>

namespace farseg {

namespace F = torch::nn::functional;

BackboneConfig BackboneConfig::tiny() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::resnet50() {
  BackboneConfig cfg;
  cfg.preset = "resnet50";
  cfg.widths = {256, 512, 1024, 2048};
  cfg.blocks = {3, 4, 6, 3};
  cfg.stem_width = 64;
  cfg.stem_kernel = 7;
  cfg.bottleneck = true;
  return cfg;
}

BackboneConfig BackboneConfig::from_preset(const std::string& name) {
  if (name == "tiny") return tiny();
  if (name == "resnet50") return resnet50();
  throw ConfigError("unknown backbone preset '" + name + "' (expected tiny or resnet50)");
}

void BackboneConfig::validate() const {
  if (widths.size() != kNumLevels || blocks.size() != kNumLevels) {
    throw ConfigError("backbone needs exactly 4 stage widths and 4 block counts");
  }
  for (size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] < 1 || blocks[i] < 1) throw ConfigError("backbone widths and block counts must be >= 1");
    if (i > 0 && widths[i] < widths[i - 1]) throw ConfigError("backbone widths must be non-decreasing");
    if (bottleneck && widths[i] % 4 != 0) throw ConfigError("bottleneck widths must be divisible by 4");
  }
  if (stem_width < 1) throw ConfigError("stem_width must be >= 1");
  if (stem_kernel < 1 || stem_kernel % 2 == 0) throw ConfigError("stem_kernel must be odd and positive");
}

void check_input_size(const torch::Tensor& image_batch) {
  if (image_batch.dim() != 4 || image_batch.size(1) != 3) {
    std::ostringstream os;
    os << "expected image batch of shape B x 3 x H x W, got " << image_batch.sizes();
    throw ShapeError(os.str());
  }
  const auto stride = level_stride(kMaxLevel);
  if (image_batch.size(2) % stride != 0) {
    throw ShapeError("input height " + std::to_string(image_batch.size(2)) + " is not divisible by 32");
  }
  if (image_batch.size(3) % stride != 0) {
    throw ShapeError("input width " + std::to_string(image_batch.size(3)) + " is not divisible by 32");
  }
}

ResidualBlockImpl::ResidualBlockImpl(int64_t in_channels, int64_t out_channels, int64_t stride,
                                     bool bottleneck) {
  body_ = torch::nn::Sequential();
  if (bottleneck) {
    const int64_t mid = out_channels / 4;
    body_->push_back(ConvBnRelu(in_channels, mid, 1));
    body_->push_back(ConvBnRelu(mid, mid, 3, stride));
    body_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(mid, out_channels, 1).bias(false)));
  } else {
    body_->push_back(ConvBnRelu(in_channels, out_channels, 3, stride));
    body_->push_back(
        torch::nn::Conv2d(torch::nn::Conv2dOptions(out_channels, out_channels, 3).padding(1).bias(false)));
  }
  body_->push_back(torch::nn::BatchNorm2d(out_channels));
  register_module("body", body_);

  if (stride != 1 || in_channels != out_channels) {
    shortcut_ = torch::nn::Sequential(
        torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1).stride(stride).bias(false)),
        torch::nn::BatchNorm2d(out_channels));
    register_module("shortcut", shortcut_);
  }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto identity = shortcut_ ? shortcut_->forward(x) : x;
  return torch::relu(body_->forward(x) + identity);
}

BackboneImpl::BackboneImpl(BackboneConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  // stride 4 after the stem: strided conv + max pool
  stem_ = torch::nn::Sequential(
      ConvBnRelu(3, cfg_.stem_width, cfg_.stem_kernel, 2),
      torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2).padding(1)));
  register_module("stem", stem_);

  int64_t in_channels = cfg_.stem_width;
  for (size_t s = 0; s < cfg_.widths.size(); ++s) {
    torch::nn::Sequential stage;
    for (int64_t b = 0; b < cfg_.blocks[s]; ++b) {
      const int64_t stride = (s > 0 && b == 0) ? 2 : 1;
      stage->push_back(ResidualBlock(in_channels, cfg_.widths[s], stride, cfg_.bottleneck));
      in_channels = cfg_.widths[s];
    }
    stages_.push_back(register_module("stage" + std::to_string(s + 1), stage));
  }
  init_conv_bn(*this);
}

BackboneFeatures BackboneImpl::forward(const torch::Tensor& image_batch) {
  check_input_size(image_batch);
  BackboneFeatures out;
  out.height = image_batch.size(2);
  out.width = image_batch.size(3);
  auto x = stem_->forward(image_batch);
  for (int level : kLevels) {
    x = stages_[level - kMinLevel]->forward(x);
    out.levels[level] = x;
  }
  return out;
}

FpnImpl::FpnImpl(const std::vector<int64_t>& in_channels, int64_t channels) : channels_(channels) {
  if (in_channels.size() != kNumLevels) throw ConfigError("FPN needs 4 input channel counts");
  if (channels < 1) throw ConfigError("FPN channel count d must be >= 1");
  for (int level : kLevels) {
    auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels[level - kMinLevel], channels, 1));
    torch::NoGradGuard no_grad;
    torch::nn::init::kaiming_uniform_(conv->weight, 1.0);
    conv->bias.zero_();
    laterals_.push_back(register_module("lateral" + std::to_string(level), conv));
  }
}

FeaturePyramid FpnImpl::forward(const BackboneFeatures& features) {
  FeaturePyramid out;
  out.channels = channels_;
  torch::Tensor top;
  for (int level = kMaxLevel; level >= kMinLevel; --level) {
    const auto& c = features.levels[level];
    if (!c.defined()) throw ShapeError("missing backbone level C" + std::to_string(level));
    auto p = lateral(level)->forward(c);
    if (top.defined()) {
      p = p + F::interpolate(top, F::InterpolateFuncOptions()
                                      .scale_factor(std::vector<double>{2.0, 2.0})
                                      .mode(torch::kNearest));
    }
    out.levels[level] = p;
    top = p;
  }
  return out;
}

SceneContext scene_pool(const BackboneFeatures& features) {
  const auto& c5 = features.levels[kMaxLevel];
  if (!c5.defined() || c5.dim() != 4) throw ShapeError("scene pooling needs a 4-d C5 feature map");
  return {c5.mean({2, 3})};
}

}  // namespace farseg
