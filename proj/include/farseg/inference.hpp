#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "farseg/dataset.hpp"
#include "farseg/evaluation.hpp"
#include "farseg/model.hpp"
#include "farseg/tiling.hpp"

namespace farseg {

struct Prediction {
  cv::Mat labels;       // H x W uint8 class ids
  torch::Tensor probs;  // K x H x W stitched class probabilities
  int64_t num_tiles = 0;
};

/// Sliding-window prediction: pad (if smaller than the window), tile, forward,
/// average softmax probabilities, crop, argmax. Runs the model in eval mode.
Prediction predict_image(FarSeg& model, const cv::Mat& image, int64_t window, int64_t stride);

/// Stitched-prediction evaluation over a dataset.
EvaluationReport evaluate_dataset(FarSeg& model, const Dataset& dataset, int64_t window, int64_t stride,
                                  const std::vector<std::string>& class_names = {});

struct RelationHeatmap {
  int level = 2;
  int output_stride = 4;
  cv::Mat heatmap;  // H x W uint8, min-max normalized relation map
  cv::Mat overlay;  // H x W x 3 colorized heatmap blended over the input (empty when alpha = 0)
};

/// Min-max normalization to [0, 255]; a constant map becomes uniform 128.
cv::Mat normalize_heatmap(const torch::Tensor& map2d);

/// One relation heatmap per pyramid level, resized to the input size.
std::vector<RelationHeatmap> visualize_relation(FarSeg& model, const cv::Mat& image, double alpha = 0.5);

}  // namespace farseg
