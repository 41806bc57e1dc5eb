#include "farseg/decoder.hpp"

#include <sstream>

namespace farseg {

namespace F = torch::nn::functional;

void DecoderConfig::validate() const {
  if (in_channels < 1) throw ConfigError("decoder input channels must be >= 1");
  if (out_channels < 1) throw ConfigError("decoder channels must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
}

torch::Tensor bilinear_resize(const torch::Tensor& x, int64_t height, int64_t width) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

UpsampleUnitImpl::UpsampleUnitImpl(int64_t in_channels, int64_t out_channels, bool upsample)
    : transform_(in_channels, out_channels, 3), upsample_(upsample) {
  register_module("transform", transform_);
}

torch::Tensor UpsampleUnitImpl::forward(const torch::Tensor& x) {
  auto y = transform_->forward(x);
  if (upsample_) y = bilinear_resize(y, y.size(2) * 2, y.size(3) * 2);
  return y;
}

DecoderImpl::DecoderImpl(DecoderConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  for (int level : kLevels) {
    const int n = level - kMinLevel;
    std::vector<UpsampleUnit> units;
    if (n == 0) {
      units.push_back(UpsampleUnit(cfg_.in_channels, cfg_.out_channels, false));
    } else {
      for (int k = 0; k < n; ++k) {
        units.push_back(UpsampleUnit(k == 0 ? cfg_.in_channels : cfg_.out_channels, cfg_.out_channels, true));
      }
    }
    for (size_t k = 0; k < units.size(); ++k) {
      register_module("level" + std::to_string(level) + "_unit" + std::to_string(k), units[k]);
      init_conv_bn(*units[k]);
    }
    units_.push_back(std::move(units));
  }
  classifier_ = register_module(
      "classifier", torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg_.out_channels, cfg_.num_classes, 1)));
}

int DecoderImpl::num_units(int level) const {
  check_level(level);
  return static_cast<int>(units_[level - kMinLevel].size());
}

int DecoderImpl::num_upsampling_units(int level) const {
  check_level(level);
  int n = 0;
  for (const auto& u : units_[level - kMinLevel]) n += u->upsamples() ? 1 : 0;
  return n;
}

torch::Tensor DecoderImpl::decode_level(const torch::Tensor& features, int level) {
  check_level(level);
  if (features.dim() != 4 || features.size(1) != cfg_.in_channels) {
    std::ostringstream os;
    os << "decoder level " << level << " expects " << cfg_.in_channels << " channels, got "
       << features.sizes();
    throw ShapeError(os.str());
  }
  auto x = features;
  for (auto& unit : units_[level - kMinLevel]) x = unit->forward(x);
  return x;
}

torch::Tensor DecoderImpl::aggregate(const LevelMap<torch::Tensor>& decoded) {
  const auto& ref = decoded[kMinLevel];
  torch::Tensor sum;
  for (int level : kLevels) {
    const auto& d = decoded[level];
    if (!d.defined() || d.sizes() != ref.sizes()) {
      std::ostringstream os;
      os << "decoded level " << level << " has shape " << (d.defined() ? d.sizes() : c10::IntArrayRef{})
         << ", expected " << ref.sizes();
      throw ShapeError(os.str());
    }
    sum = sum.defined() ? sum + d : d;
  }
  auto logits = classifier_->forward(sum / static_cast<double>(kNumLevels));
  return bilinear_resize(logits, logits.size(2) * 4, logits.size(3) * 4);
}

torch::Tensor DecoderImpl::forward(const LevelMap<torch::Tensor>& features) {
  LevelMap<torch::Tensor> decoded;
  for (int level : kLevels) decoded[level] = decode_level(features[level], level);
  return aggregate(decoded);
}

}  // namespace farseg
