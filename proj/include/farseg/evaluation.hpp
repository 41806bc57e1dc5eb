#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "farseg/dataset.hpp"

namespace farseg {

/// K x K pixel counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int64_t num_classes, std::optional<int64_t> ignore_label = kIgnoreLabel);

  /// Adds one count per pixel; ground-truth pixels equal to the ignore label are skipped.
  void accumulate(std::span<const int64_t> pred, std::span<const int64_t> gt);
  void accumulate(const torch::Tensor& pred, const torch::Tensor& gt);
  void accumulate(const cv::Mat& pred, const cv::Mat& gt);

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) { return a += b; }
  friend bool operator==(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    return a.num_classes_ == b.num_classes_ && a.counts_ == b.counts_;
  }

  uint64_t at(int64_t gt, int64_t pred) const { return counts_[static_cast<size_t>(gt * num_classes_ + pred)]; }
  uint64_t total() const;
  int64_t num_classes() const { return num_classes_; }
  std::optional<int64_t> ignore_label() const { return ignore_label_; }

  /// TP / (TP + FP + FN); nullopt for classes absent from both ground truth and prediction.
  std::vector<std::optional<double>> iou_per_class() const;

  /// Mean over defined classes. Without background, class 0 is left out.
  /// Throws DataError when no class is defined.
  double mean_iou(bool include_background = true) const;

  std::vector<uint64_t> gt_pixels() const;

 private:
  int64_t num_classes_;
  std::optional<int64_t> ignore_label_;
  std::vector<uint64_t> counts_;
};

struct ForegroundStats {
  std::vector<double> per_image;
  double aggregate = 0.0;
};

/// Fraction of pixels that are neither background (0) nor the ignore label.
double foreground_ratio(const cv::Mat& mask, uint8_t ignore_label = kIgnoreLabel);
ForegroundStats foreground_ratio(const Dataset& dataset, uint8_t ignore_label = kIgnoreLabel);

struct ImageScore {
  std::string name;
  std::vector<std::optional<double>> iou;
};

struct EvaluationReport {
  ConfusionMatrix confusion;
  std::vector<ImageScore> per_image;
  double foreground_ratio = 0.0;
  std::vector<std::string> class_names;

  nlohmann::json to_json() const;
  /// One row per image, one column per class; undefined IoUs are empty cells.
  std::string per_image_csv() const;
};

}  // namespace farseg
