#include "farseg/relation.hpp"

#include <sstream>

namespace farseg {

void RelationConfig::validate() const {
  if (channels < 1 || scene_channels < 1) throw ConfigError("relation channel counts must be >= 1");
  if (embed_dim < 1) throw ConfigError("d_u must be >= 1");
}

torch::Tensor relation_map(const SceneEmbedding& scene, const torch::Tensor& projected) {
  const auto& u = scene.u;
  if (u.dim() != 2 || projected.dim() != 4 || u.size(0) != projected.size(0) ||
      u.size(1) != projected.size(1)) {
    std::ostringstream os;
    os << "relation map: scene embedding " << u.sizes() << " does not match projected features "
       << projected.sizes();
    throw ShapeError(os.str());
  }
  return (projected * u.unsqueeze(-1).unsqueeze(-1)).sum(1, /*keepdim=*/true);
}

torch::Tensor gate(const torch::Tensor& relation, const torch::Tensor& encoded) {
  if (relation.dim() != 4 || relation.size(1) != 1 || encoded.dim() != 4 ||
      relation.size(0) != encoded.size(0) || relation.size(2) != encoded.size(2) ||
      relation.size(3) != encoded.size(3)) {
    std::ostringstream os;
    os << "gate: relation map " << relation.sizes() << " not aligned with features " << encoded.sizes();
    throw ShapeError(os.str());
  }
  return torch::sigmoid(relation) * encoded;
}

FSRelationImpl::FSRelationImpl(RelationConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  scene_encoder_ = register_module(
      "scene_encoder", torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg_.scene_channels, cfg_.embed_dim, 1)));
  const int num_proj = cfg_.scale_aware ? kNumLevels : 1;
  for (int i = 0; i < num_proj; ++i) {
    const std::string name = cfg_.scale_aware ? "projection" + std::to_string(i + kMinLevel) : "projection";
    projections_.push_back(register_module(name, ConvBnRelu(cfg_.channels, cfg_.embed_dim, 1)));
  }
  for (int level : kLevels) {
    encoders_.push_back(
        register_module("encoder" + std::to_string(level), ConvBnRelu(cfg_.channels, cfg_.channels, 1)));
  }
  for (auto& p : projections_) init_conv_bn(*p);
  for (auto& e : encoders_) init_conv_bn(*e);
}

ConvBnRelu& FSRelationImpl::projection(int level) {
  check_level(level);
  return cfg_.scale_aware ? projections_.at(level - kMinLevel) : projections_.front();
}

torch::Tensor FSRelationImpl::scale_aware_project(const torch::Tensor& features, int level) {
  if (features.dim() != 4 || features.size(1) != cfg_.channels) {
    std::ostringstream os;
    os << "projection expects " << cfg_.channels << " channels, got " << features.sizes();
    throw ShapeError(os.str());
  }
  return projection(level)->forward(features);
}

SceneEmbedding FSRelationImpl::scene_embed(const SceneContext& scene) {
  const auto& c6 = scene.c6;
  if (c6.dim() != 2 || c6.size(1) != cfg_.scene_channels) {
    std::ostringstream os;
    os << "scene embedding expects B x " << cfg_.scene_channels << " context, got " << c6.sizes();
    throw ShapeError(os.str());
  }
  return {scene_encoder_->forward(c6.unsqueeze(-1).unsqueeze(-1)).flatten(1)};
}

torch::Tensor FSRelationImpl::encode(const torch::Tensor& features, int level) {
  check_level(level);
  return encoder(level)->forward(features);
}

torch::Tensor FSRelationImpl::enhance(const torch::Tensor& features, const torch::Tensor& relation,
                                      int level) {
  return gate(relation, encode(features, level));
}

RelationSet FSRelationImpl::forward(const FeaturePyramid& pyramid, const SceneContext& scene) {
  RelationSet out;
  out.scene = scene_embed(scene);
  for (int level : kLevels) {
    const auto& v = pyramid.levels[level];
    if (!v.defined()) throw ShapeError("missing pyramid level P" + std::to_string(level));
    out.projected[level] = scale_aware_project(v, level);
    out.relation[level] = relation_map(out.scene, out.projected[level]);
    out.encoded[level] = encode(v, level);
    out.enhanced[level] = gate(out.relation[level], out.encoded[level]);
  }
  return out;
}

}  // namespace farseg
