#pragma once

#include <optional>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "farseg/decoder.hpp"
#include "farseg/encoder.hpp"
#include "farseg/relation.hpp"

namespace farseg {

struct ModelConfig {
  BackboneConfig backbone;
  int64_t fpn_channels = 256;      // d
  int64_t embed_dim = 256;         // d_u
  bool fs_relation = true;         // off: decoder consumes the pyramid directly (FPN baseline)
  bool scale_aware = true;
  int64_t decoder_channels = 128;
  int64_t num_classes = 16;

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

struct FarSegOutput {
  torch::Tensor logits;  // B x K x H x W
  BackboneFeatures features;
  FeaturePyramid pyramid;
  SceneContext scene;
  std::optional<RelationSet> relation;
};

class FarSegImpl : public torch::nn::Module {
 public:
  explicit FarSegImpl(ModelConfig cfg);

  FarSegOutput forward_all(const torch::Tensor& images);
  torch::Tensor forward(const torch::Tensor& images) { return forward_all(images).logits; }

  const ModelConfig& config() const { return cfg_; }
  Backbone& backbone() { return backbone_; }
  Fpn& fpn() { return fpn_; }
  FSRelation& relation() { return relation_; }
  Decoder& decoder() { return decoder_; }

 private:
  ModelConfig cfg_;
  Backbone backbone_{nullptr};
  Fpn fpn_{nullptr};
  FSRelation relation_{nullptr};
  Decoder decoder_{nullptr};
};
TORCH_MODULE(FarSeg);

int64_t count_parameters(const torch::nn::Module& module);

}  // namespace farseg
