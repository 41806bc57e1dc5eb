#pragma once

#include <vector>

#include <torch/torch.h>

#include "farseg/encoder.hpp"
#include "farseg/layers.hpp"
#include "farseg/level_map.hpp"

namespace farseg {

struct RelationConfig {
  int64_t channels = 256;        // d, channels of the pyramid features
  int64_t scene_channels = 128;  // channels of C_5 / length of c6
  int64_t embed_dim = 256;       // d_u, shared manifold dimension
  bool scale_aware = true;       // one projection per level, else a single shared one

  void validate() const;
};

/// Scene embedding u, shape B x d_u. The same tensor feeds every level.
struct SceneEmbedding {
  torch::Tensor u;
};

/// Per-level relation outputs plus the intermediates that produced them.
struct RelationSet {
  LevelMap<torch::Tensor> projected;  // v~_i, B x d_u x H_i x W_i
  LevelMap<torch::Tensor> relation;   // r_i,  B x 1 x H_i x W_i
  LevelMap<torch::Tensor> encoded;    // kappa_i(v_i), B x d x H_i x W_i
  LevelMap<torch::Tensor> enhanced;   // z_i,  B x d x H_i x W_i
  SceneEmbedding scene;
};

/// Per-pixel inner product over channels: r[b,0,h,w] = sum_c u[b,c] * v[b,c,h,w].
torch::Tensor relation_map(const SceneEmbedding& scene, const torch::Tensor& projected);

/// sigmoid(r) broadcast over channels times the re-encoded features.
torch::Tensor gate(const torch::Tensor& relation, const torch::Tensor& encoded);

/// Foreground-scene relation module.
class FSRelationImpl : public torch::nn::Module {
 public:
  explicit FSRelationImpl(RelationConfig cfg);

  torch::Tensor scale_aware_project(const torch::Tensor& features, int level);
  SceneEmbedding scene_embed(const SceneContext& scene);
  torch::Tensor encode(const torch::Tensor& features, int level);
  torch::Tensor enhance(const torch::Tensor& features, const torch::Tensor& relation, int level);

  RelationSet forward(const FeaturePyramid& pyramid, const SceneContext& scene);

  const RelationConfig& config() const { return cfg_; }
  torch::nn::Conv2d& scene_encoder() { return scene_encoder_; }
  ConvBnRelu& projection(int level);
  ConvBnRelu& encoder(int level) { return encoders_.at(level - kMinLevel); }
  size_t num_projections() const { return projections_.size(); }

 private:
  RelationConfig cfg_;
  torch::nn::Conv2d scene_encoder_{nullptr};
  std::vector<ConvBnRelu> projections_;
  std::vector<ConvBnRelu> encoders_;
};
TORCH_MODULE(FSRelation);

}  // namespace farseg
