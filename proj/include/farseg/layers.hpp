#pragma once

#include <torch/torch.h>

namespace farseg {

/// Convolution (no bias) followed by batch normalization and ReLU.
class ConvBnReluImpl : public torch::nn::Module {
 public:
  ConvBnReluImpl(int64_t in_channels, int64_t out_channels, int64_t kernel_size, int64_t stride = 1);

  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  torch::nn::BatchNorm2d bn{nullptr};
};
TORCH_MODULE(ConvBnRelu);

/// Kaiming-normal convolution weights, unit/zero batch-norm affine parameters
/// for every descendant of `module`.
void init_conv_bn(torch::nn::Module& module);

}  // namespace farseg
