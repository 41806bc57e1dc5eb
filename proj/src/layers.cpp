#include "farseg/layers.hpp"

namespace farseg {

ConvBnReluImpl::ConvBnReluImpl(int64_t in_channels, int64_t out_channels, int64_t kernel_size,
                               int64_t stride)
    : conv(torch::nn::Conv2dOptions(in_channels, out_channels, kernel_size)
               .stride(stride)
               .padding(kernel_size / 2)
               .bias(false)),
      bn(out_channels) {
  register_module("conv", conv);
  register_module("bn", bn);
}

torch::Tensor ConvBnReluImpl::forward(const torch::Tensor& x) {
  return torch::relu(bn->forward(conv->forward(x)));
}

void init_conv_bn(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& m : module.modules(/*include_self=*/false)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanOut, torch::kReLU);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* bn = m->as<torch::nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
    }
  }
}

}  // namespace farseg
