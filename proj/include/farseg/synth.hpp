#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "farseg/dataset.hpp"

namespace farseg {

/// Synthetic imbalanced segmentation data: small colored shapes over a textured background.
struct SynthConfig {
  int64_t num_images = 64;
  int64_t height = 64;
  int64_t width = 64;
  int64_t num_classes = 4;
  double target_foreground_ratio = 0.02;
  int64_t min_diameter = 3;
  int64_t max_diameter = 12;
  int64_t max_shapes_per_image = 0;  // 0: place shapes until the ratio budget is met
  int64_t distractors_per_image = 2;
  int64_t retry_budget = 2000;
  uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& cfg);
void from_json(const nlohmann::json& j, SynthConfig& cfg);

enum class ShapeKind { kRectangle, kEllipse, kBar };

/// Axis-aligned shape inside [x, x + w) x [y, y + h). Ellipses are inscribed in the box.
struct Shape {
  ShapeKind kind = ShapeKind::kRectangle;
  uint8_t class_id = 1;
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
};

/// Shape kind assigned to a foreground class: rectangles, ellipses and elongated bars in turn.
ShapeKind kind_for_class(int class_id);

/// Writes class_id into `mask` at every covered pixel; returns the covered pixel count.
int64_t rasterize(const Shape& shape, cv::Mat& mask);

struct SynthSample {
  LabeledSample sample;
  std::vector<Shape> shapes;  // painted in order
};

struct SynthStats {
  int64_t foreground_pixels = 0;
  int64_t total_pixels = 0;
  std::vector<int64_t> class_pixels;
  double foreground_ratio() const {
    return total_pixels == 0 ? 0.0 : static_cast<double>(foreground_pixels) / static_cast<double>(total_pixels);
  }
};

struct SynthDataset {
  std::vector<SynthSample> samples;
  SynthStats stats;

  Dataset labeled() const;
};

/// Deterministic in cfg.seed. Throws DataError when the realized foreground
/// ratio misses the target by more than 20% (relative) after the retry budget.
SynthDataset synth_generate(const SynthConfig& cfg);

/// Background texture for image `index`, identical to what synth_generate paints under the shapes.
cv::Mat synth_background(const SynthConfig& cfg, int64_t index);

nlohmann::json synth_manifest(const SynthConfig& cfg, const SynthDataset& data);

/// Writes images/, masks/ and manifest.json under `root`.
void save_synth(const SynthConfig& cfg, const SynthDataset& data, const std::filesystem::path& root);

}  // namespace farseg
