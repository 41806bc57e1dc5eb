#pragma once

#include <cstdint>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace farseg {

struct Size2 {
  int64_t height = 0;
  int64_t width = 0;
  friend bool operator==(const Size2&, const Size2&) = default;
};

struct Origin {
  int64_t y = 0;
  int64_t x = 0;
  friend bool operator==(const Origin&, const Origin&) = default;
  friend auto operator<=>(const Origin&, const Origin&) = default;
};

/// Sliding-window layout over an image. Edge windows are shifted inward so
/// that every window lies inside the image and every pixel is covered.
struct TileGrid {
  Size2 image_size;
  Size2 window{896, 896};
  int64_t stride = 512;
  std::vector<Origin> origins;  // row-major
};

/// Window origins along one axis: {0, s, 2s, ...} plus size - window when the
/// last regular window stops short of the edge.
std::vector<int64_t> axis_origins(int64_t size, int64_t window, int64_t stride);

/// Throws ShapeError when the window exceeds the image (pad first) or when
/// stride > window would leave gaps.
TileGrid tile(Size2 image_size, Size2 window, int64_t stride);

struct TileProbabilities {
  Origin origin;
  torch::Tensor probs;  // K x h x w or 1 x K x h x w
};

/// Per-pixel mean of the tile probabilities. Returns K x H x W.
torch::Tensor stitch(const std::vector<TileProbabilities>& tiles, Size2 image_size);

/// Reflect-pads `image` on the bottom/right so that it is at least `window` in each axis.
cv::Mat pad_to_window(const cv::Mat& image, Size2 window);

/// Per-pixel count of covering windows (H x W, int32).
cv::Mat coverage_counts(const TileGrid& grid);

}  // namespace farseg
