#include "farseg/model.hpp"

namespace farseg {

void ModelConfig::validate() const {
  backbone.validate();
  if (fpn_channels < 1) throw ConfigError("model.d must be >= 1");
  if (embed_dim < 1) throw ConfigError("model.d_u must be >= 1");
  if (decoder_channels < 1) throw ConfigError("model.decoder_channels must be >= 1");
  if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
  j = nlohmann::json{
      {"backbone",
       {{"preset", cfg.backbone.preset},
        {"widths", cfg.backbone.widths},
        {"blocks", cfg.backbone.blocks},
        {"stem_width", cfg.backbone.stem_width},
        {"stem_kernel", cfg.backbone.stem_kernel},
        {"bottleneck", cfg.backbone.bottleneck}}},
      {"d", cfg.fpn_channels},
      {"d_u", cfg.embed_dim},
      {"fs_relation", cfg.fs_relation},
      {"scale_aware", cfg.scale_aware},
      {"decoder_channels", cfg.decoder_channels},
      {"num_classes", cfg.num_classes},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
  if (j.contains("backbone")) {
    const auto& b = j.at("backbone");
    // a preset resets the layout; explicit keys then override it
    if (b.contains("preset")) cfg.backbone = BackboneConfig::from_preset(b.at("preset").get<std::string>());
    if (b.contains("widths")) cfg.backbone.widths = b.at("widths").get<std::vector<int64_t>>();
    if (b.contains("blocks")) cfg.backbone.blocks = b.at("blocks").get<std::vector<int64_t>>();
    if (b.contains("stem_width")) cfg.backbone.stem_width = b.at("stem_width").get<int64_t>();
    if (b.contains("stem_kernel")) cfg.backbone.stem_kernel = b.at("stem_kernel").get<int64_t>();
    if (b.contains("bottleneck")) cfg.backbone.bottleneck = b.at("bottleneck").get<bool>();
  }
  cfg.fpn_channels = j.value("d", cfg.fpn_channels);
  cfg.embed_dim = j.value("d_u", cfg.embed_dim);
  cfg.fs_relation = j.value("fs_relation", cfg.fs_relation);
  cfg.scale_aware = j.value("scale_aware", cfg.scale_aware);
  cfg.decoder_channels = j.value("decoder_channels", cfg.decoder_channels);
  cfg.num_classes = j.value("num_classes", cfg.num_classes);
}

FarSegImpl::FarSegImpl(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  backbone_ = register_module("backbone", Backbone(cfg_.backbone));
  fpn_ = register_module("fpn", Fpn(cfg_.backbone.widths, cfg_.fpn_channels));
  if (cfg_.fs_relation) {
    RelationConfig rc;
    rc.channels = cfg_.fpn_channels;
    rc.scene_channels = cfg_.backbone.widths.back();
    rc.embed_dim = cfg_.embed_dim;
    rc.scale_aware = cfg_.scale_aware;
    relation_ = register_module("relation", FSRelation(rc));
  }
  decoder_ = register_module(
      "decoder", Decoder(DecoderConfig{cfg_.fpn_channels, cfg_.decoder_channels, cfg_.num_classes}));
}

FarSegOutput FarSegImpl::forward_all(const torch::Tensor& images) {
  FarSegOutput out;
  out.features = backbone_->forward(images);
  out.pyramid = fpn_->forward(out.features);
  out.scene = scene_pool(out.features);
  if (relation_) {
    out.relation = relation_->forward(out.pyramid, out.scene);
    out.logits = decoder_->forward(out.relation->enhanced);
  } else {
    out.logits = decoder_->forward(out.pyramid.levels);
  }
  return out;
}

int64_t count_parameters(const torch::nn::Module& module) {
  int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

}  // namespace farseg
