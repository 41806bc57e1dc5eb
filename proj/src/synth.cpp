#include "farseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <opencv2/imgproc.hpp>

#include "farseg/augment.hpp"
#include "farseg/errors.hpp"

namespace farseg {

namespace {

constexpr double kRatioTolerance = 0.2;
constexpr double kNoiseSigma = 10.0;

std::mt19937_64 image_rng(uint64_t seed, int64_t index, uint64_t stream) {
  return std::mt19937_64(mix_seed(mix_seed(seed) ^ mix_seed(static_cast<uint64_t>(index) * 2 + stream)));
}

cv::Vec3b class_color(int class_id, int64_t num_classes) {
  const int hue = static_cast<int>((class_id - 1) * 180 / std::max<int64_t>(1, num_classes - 1));
  cv::Mat hsv(1, 1, CV_8UC3, cv::Scalar(hue, 200, 230));
  cv::Mat bgr;
  cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
  return bgr.at<cv::Vec3b>(0, 0);
}

uint8_t saturate(double v) { return static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Shape random_shape(std::mt19937_64& rng, const SynthConfig& cfg, int class_id) {
  std::uniform_int_distribution<int> diameter(static_cast<int>(cfg.min_diameter), static_cast<int>(cfg.max_diameter));
  Shape s;
  s.class_id = static_cast<uint8_t>(class_id);
  s.kind = kind_for_class(class_id);
  switch (s.kind) {
    case ShapeKind::kRectangle:
    case ShapeKind::kEllipse:
      s.w = diameter(rng);
      s.h = diameter(rng);
      break;
    case ShapeKind::kBar: {
      const int length = diameter(rng);
      const int thickness = std::max(2, length / 4);
      const bool horizontal = std::bernoulli_distribution(0.5)(rng);
      s.w = horizontal ? length : thickness;
      s.h = horizontal ? thickness : length;
      break;
    }
  }
  s.w = std::min<int>(s.w, static_cast<int>(cfg.width));
  s.h = std::min<int>(s.h, static_cast<int>(cfg.height));
  s.x = std::uniform_int_distribution<int>(0, static_cast<int>(cfg.width) - s.w)(rng);
  s.y = std::uniform_int_distribution<int>(0, static_cast<int>(cfg.height) - s.h)(rng);
  return s;
}

template <typename Fn>
void for_each_pixel(const Shape& s, Fn&& fn) {
  const double cx = s.x + s.w / 2.0;
  const double cy = s.y + s.h / 2.0;
  const double ax = s.w / 2.0;
  const double ay = s.h / 2.0;
  for (int y = s.y; y < s.y + s.h; ++y) {
    for (int x = s.x; x < s.x + s.w; ++x) {
      if (s.kind == ShapeKind::kEllipse) {
        const double dx = (x + 0.5 - cx) / ax;
        const double dy = (y + 0.5 - cy) / ay;
        if (dx * dx + dy * dy > 1.0) continue;
      }
      fn(y, x);
    }
  }
}

int64_t count_new_pixels(const Shape& s, const cv::Mat& mask) {
  int64_t n = 0;
  for_each_pixel(s, [&](int y, int x) { n += mask.at<uint8_t>(y, x) == 0 ? 1 : 0; });
  return n;
}

void paint(const Shape& s, const cv::Vec3b& color, std::mt19937_64& rng, cv::Mat& image) {
  std::normal_distribution<double> noise(0.0, kNoiseSigma);
  for_each_pixel(s, [&](int y, int x) {
    auto& px = image.at<cv::Vec3b>(y, x);
    for (int c = 0; c < 3; ++c) px[c] = saturate(color[c] + noise(rng));
  });
}

}  // namespace

void SynthConfig::validate() const {
  if (num_images < 1) throw ConfigError("synth.num_images must be >= 1");
  if (height < 1 || width < 1) throw ConfigError("synth image size must be positive");
  if (num_classes < 2 || num_classes > 255) throw ConfigError("synth.num_classes must be in [2, 255]");
  if (!(target_foreground_ratio > 0.0 && target_foreground_ratio < 1.0)) {
    throw ConfigError("synth.target_foreground_ratio must be in (0, 1)");
  }
  if (min_diameter < 1 || max_diameter < min_diameter) throw ConfigError("synth diameter range is invalid");
  if (max_shapes_per_image < 0 || distractors_per_image < 0 || retry_budget < 1) {
    throw ConfigError("synth shape counts must be non-negative");
  }
}

void to_json(nlohmann::json& j, const SynthConfig& cfg) {
  j = nlohmann::json{{"num_images", cfg.num_images},
                     {"height", cfg.height},
                     {"width", cfg.width},
                     {"num_classes", cfg.num_classes},
                     {"target_foreground_ratio", cfg.target_foreground_ratio},
                     {"min_diameter", cfg.min_diameter},
                     {"max_diameter", cfg.max_diameter},
                     {"max_shapes_per_image", cfg.max_shapes_per_image},
                     {"distractors_per_image", cfg.distractors_per_image},
                     {"retry_budget", cfg.retry_budget},
                     {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, SynthConfig& cfg) {
  cfg.num_images = j.value("num_images", cfg.num_images);
  cfg.height = j.value("height", cfg.height);
  cfg.width = j.value("width", cfg.width);
  cfg.num_classes = j.value("num_classes", cfg.num_classes);
  cfg.target_foreground_ratio = j.value("target_foreground_ratio", cfg.target_foreground_ratio);
  cfg.min_diameter = j.value("min_diameter", cfg.min_diameter);
  cfg.max_diameter = j.value("max_diameter", cfg.max_diameter);
  cfg.max_shapes_per_image = j.value("max_shapes_per_image", cfg.max_shapes_per_image);
  cfg.distractors_per_image = j.value("distractors_per_image", cfg.distractors_per_image);
  cfg.retry_budget = j.value("retry_budget", cfg.retry_budget);
  cfg.seed = j.value("seed", cfg.seed);
}

ShapeKind kind_for_class(int class_id) {
  switch ((class_id - 1) % 3) {
    case 0: return ShapeKind::kRectangle;
    case 1: return ShapeKind::kEllipse;
    default: return ShapeKind::kBar;
  }
}

int64_t rasterize(const Shape& shape, cv::Mat& mask) {
  int64_t n = 0;
  for_each_pixel(shape, [&](int y, int x) {
    mask.at<uint8_t>(y, x) = shape.class_id;
    ++n;
  });
  return n;
}

cv::Mat synth_background(const SynthConfig& cfg, int64_t index) {
  auto rng = image_rng(cfg.seed, index, 0);
  const int h = static_cast<int>(cfg.height);
  const int w = static_cast<int>(cfg.width);

  // low-frequency terrain: coarse random grid, bicubic upsampled
  std::uniform_real_distribution<double> base(70.0, 150.0);
  std::uniform_real_distribution<double> jitter(-25.0, 25.0);
  const int gh = std::max(2, h / 16);
  const int gw = std::max(2, w / 16);
  cv::Mat coarse(gh, gw, CV_32FC3);
  const double r0 = base(rng), g0 = base(rng), b0 = base(rng);
  for (int y = 0; y < gh; ++y) {
    for (int x = 0; x < gw; ++x) {
      coarse.at<cv::Vec3f>(y, x) = cv::Vec3f(static_cast<float>(b0 + jitter(rng)), static_cast<float>(g0 + jitter(rng)),
                                             static_cast<float>(r0 + jitter(rng)));
    }
  }
  cv::Mat smooth;
  cv::resize(coarse, smooth, cv::Size(w, h), 0, 0, cv::INTER_CUBIC);

  std::normal_distribution<double> noise(0.0, kNoiseSigma);
  cv::Mat image(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto s = smooth.at<cv::Vec3f>(y, x);
      auto& px = image.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) px[c] = saturate(s[c] + noise(rng));
    }
  }

  // unlabeled clutter with muted versions of the class colors
  std::uniform_int_distribution<int> any_class(1, static_cast<int>(cfg.num_classes) - 1);
  for (int64_t k = 0; k < cfg.distractors_per_image; ++k) {
    const int cls = any_class(rng);
    Shape s = random_shape(rng, cfg, cls);
    s.kind = ShapeKind::kRectangle;
    const auto c = class_color(cls, cfg.num_classes);
    const auto g = (c[0] + c[1] + c[2]) / 3.0;
    const cv::Vec3b muted(saturate(0.5 * c[0] + 0.5 * g), saturate(0.5 * c[1] + 0.5 * g), saturate(0.5 * c[2] + 0.5 * g));
    paint(s, muted, rng, image);
  }
  return image;
}

Dataset SynthDataset::labeled() const {
  Dataset out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.sample);
  return out;
}

SynthDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset data;
  data.stats.class_pixels.assign(static_cast<size_t>(cfg.num_classes), 0);
  const int64_t pixels_per_image = cfg.height * cfg.width;
  std::uniform_int_distribution<int> any_class(1, static_cast<int>(cfg.num_classes) - 1);

  for (int64_t i = 0; i < cfg.num_images; ++i) {
    auto rng = image_rng(cfg.seed, i, 1);
    SynthSample out;
    out.sample.name = "synth_" + std::to_string(i);
    out.sample.image = synth_background(cfg, i);
    out.sample.mask = cv::Mat::zeros(static_cast<int>(cfg.height), static_cast<int>(cfg.width), CV_8UC1);

    // running budget keeps the dataset-level ratio on target
    const double target_total = cfg.target_foreground_ratio * static_cast<double>(pixels_per_image * (i + 1));
    const double budget = target_total - static_cast<double>(data.stats.foreground_pixels);
    int64_t fg = 0;
    int64_t retries = 0;
    while (retries < cfg.retry_budget) {
      if (cfg.max_shapes_per_image > 0 && static_cast<int64_t>(out.shapes.size()) >= cfg.max_shapes_per_image) break;
      if (cfg.max_shapes_per_image == 0 && static_cast<double>(fg) >= budget * (1.0 - kRatioTolerance / 2)) break;
      Shape s = random_shape(rng, cfg, any_class(rng));
      const int64_t added = count_new_pixels(s, out.sample.mask);
      if (cfg.max_shapes_per_image == 0 && static_cast<double>(fg + added) > budget * (1.0 + kRatioTolerance / 2)) {
        ++retries;
        continue;
      }
      paint(s, class_color(s.class_id, cfg.num_classes), rng, out.sample.image);
      rasterize(s, out.sample.mask);
      out.shapes.push_back(s);
      fg += added;
    }
    for (int y = 0; y < out.sample.mask.rows; ++y) {
      const auto* row = out.sample.mask.ptr<uint8_t>(y);
      for (int x = 0; x < out.sample.mask.cols; ++x) ++data.stats.class_pixels[row[x]];
    }
    data.stats.foreground_pixels += fg;
    data.stats.total_pixels += pixels_per_image;
    data.samples.push_back(std::move(out));
  }

  if (cfg.max_shapes_per_image == 0) {
    const double ratio = data.stats.foreground_ratio();
    if (std::abs(ratio - cfg.target_foreground_ratio) > kRatioTolerance * cfg.target_foreground_ratio) {
      throw DataError("synthetic foreground ratio " + std::to_string(ratio) + " misses target " +
                      std::to_string(cfg.target_foreground_ratio) +
                      " by more than 20%; widen the diameter range or raise retry_budget");
    }
  }
  return data;
}

nlohmann::json synth_manifest(const SynthConfig& cfg, const SynthDataset& data) {
  nlohmann::json names = nlohmann::json::array();
  for (const auto& s : data.samples) names.push_back(s.sample.name);
  return {{"generator", "synth"},
          {"config", cfg},
          {"num_images", data.samples.size()},
          {"foreground_pixels", data.stats.foreground_pixels},
          {"total_pixels", data.stats.total_pixels},
          {"foreground_ratio", data.stats.foreground_ratio()},
          {"class_pixels", data.stats.class_pixels},
          {"samples", names}};
}

void save_synth(const SynthConfig& cfg, const SynthDataset& data, const std::filesystem::path& root) {
  save_dataset(data.labeled(), root);
  std::ofstream out(root / "manifest.json");
  if (!out) throw DataError("cannot write manifest under " + root.string());
  out << synth_manifest(cfg, data).dump(2) << "\n";
}

}  // namespace farseg
