#include "farseg/inference.hpp"

#include <cstring>

#include <opencv2/imgproc.hpp>

#include "farseg/decoder.hpp"
#include "farseg/errors.hpp"

namespace farseg {

namespace {

class EvalModeGuard {
 public:
  explicit EvalModeGuard(FarSeg& model) : model_(model), was_training_(model->is_training()) { model_->eval(); }
  ~EvalModeGuard() { model_->train(was_training_); }
  EvalModeGuard(const EvalModeGuard&) = delete;
  EvalModeGuard& operator=(const EvalModeGuard&) = delete;

 private:
  FarSeg& model_;
  bool was_training_;
};

int64_t round_up(int64_t v, int64_t m) { return (v + m - 1) / m * m; }

}  // namespace

Prediction predict_image(FarSeg& model, const cv::Mat& image, int64_t window, int64_t stride) {
  if (window % 32 != 0) throw ConfigError("prediction window must be a multiple of 32");
  EvalModeGuard guard(model);
  torch::NoGradGuard no_grad;

  const Size2 original{image.rows, image.cols};
  const Size2 win{window, window};
  cv::Mat padded = pad_to_window(image, win);
  const Size2 padded_size{padded.rows, padded.cols};
  const auto grid = tile(padded_size, win, stride);
  const auto dtype = model->parameters().front().scalar_type();

  std::vector<TileProbabilities> tiles;
  tiles.reserve(grid.origins.size());
  for (const auto& o : grid.origins) {
    cv::Mat crop = padded(cv::Rect(static_cast<int>(o.x), static_cast<int>(o.y), static_cast<int>(window),
                                   static_cast<int>(window)))
                       .clone();
    auto x = image_to_tensor(crop).unsqueeze(0).to(dtype);
    tiles.push_back({o, torch::softmax(model->forward(x), 1).squeeze(0)});
  }

  Prediction out;
  out.num_tiles = static_cast<int64_t>(tiles.size());
  using torch::indexing::Slice;
  out.probs = stitch(tiles, padded_size)
                  .index({Slice(), Slice(0, original.height), Slice(0, original.width)})
                  .contiguous();
  out.labels = tensor_to_mask(out.probs.argmax(0));
  return out;
}

EvaluationReport evaluate_dataset(FarSeg& model, const Dataset& dataset, int64_t window, int64_t stride,
                                  const std::vector<std::string>& class_names) {
  const auto k = model->config().num_classes;
  EvaluationReport report{ConfusionMatrix(k), {}, 0.0, class_names};
  for (const auto& sample : dataset) {
    validate_sample(sample, k);
    const auto pred = predict_image(model, sample.image, window, stride);
    ConfusionMatrix cm(k);
    cm.accumulate(pred.labels, sample.mask);
    report.per_image.push_back({sample.name, cm.iou_per_class()});
    report.confusion += cm;
  }
  report.foreground_ratio = foreground_ratio(dataset).aggregate;
  return report;
}

cv::Mat normalize_heatmap(const torch::Tensor& map2d) {
  auto m = map2d.to(torch::kDouble);
  const double lo = m.min().item<double>();
  const double hi = m.max().item<double>();
  cv::Mat out(static_cast<int>(m.size(0)), static_cast<int>(m.size(1)), CV_8UC1);
  if (!(hi > lo)) {
    out.setTo(128);
    return out;
  }
  auto scaled = ((m - lo) / (hi - lo) * 255.0).round().clamp(0, 255).to(torch::kUInt8).contiguous();
  std::memcpy(out.data, scaled.data_ptr<uint8_t>(), static_cast<size_t>(scaled.numel()));
  return out;
}

std::vector<RelationHeatmap> visualize_relation(FarSeg& model, const cv::Mat& image, double alpha) {
  if (!model->config().fs_relation) throw ConfigError("model has no foreground-scene relation module");
  EvalModeGuard guard(model);
  torch::NoGradGuard no_grad;

  // pad to a multiple of 32 so every pyramid level exists, then crop back
  cv::Mat padded = pad_to_window(image, {round_up(image.rows, 32), round_up(image.cols, 32)});
  const auto dtype = model->parameters().front().scalar_type();
  auto out = model->forward_all(image_to_tensor(padded).unsqueeze(0).to(dtype));

  std::vector<RelationHeatmap> maps;
  using torch::indexing::Slice;
  for (int level : kLevels) {
    auto r = bilinear_resize(out.relation->relation[level], padded.rows, padded.cols)
                 .index({0, 0, Slice(0, image.rows), Slice(0, image.cols)});
    RelationHeatmap h;
    h.level = level;
    h.output_stride = level_stride(level);
    h.heatmap = normalize_heatmap(r);
    if (alpha > 0.0) {
      cv::Mat color;
      cv::applyColorMap(h.heatmap, color, cv::COLORMAP_JET);
      cv::addWeighted(color, alpha, image, 1.0 - alpha, 0.0, h.overlay);
    }
    maps.push_back(std::move(h));
  }
  return maps;
}

}  // namespace farseg
