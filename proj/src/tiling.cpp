#include "farseg/tiling.hpp"

#include <algorithm>
#include <opencv2/core.hpp>
#include <sstream>

#include "farseg/errors.hpp"

namespace farseg {

std::vector<int64_t> axis_origins(int64_t size, int64_t window, int64_t stride) {
  std::vector<int64_t> out;
  for (int64_t o = 0; o + window <= size; o += stride) out.push_back(o);
  if (out.empty() || out.back() + window < size) out.push_back(size - window);
  return out;
}

TileGrid tile(Size2 image_size, Size2 window, int64_t stride) {
  if (window.height < 1 || window.width < 1 || stride < 1) {
    throw ConfigError("tiling window and stride must be positive");
  }
  if (stride > std::min(window.height, window.width)) {
    throw ConfigError("tiling stride " + std::to_string(stride) + " exceeds the window and would leave gaps");
  }
  if (window.height > image_size.height || window.width > image_size.width) {
    std::ostringstream os;
    os << "window " << window.height << "x" << window.width << " is larger than image " << image_size.height
       << "x" << image_size.width << "; pad the image to the window size first";
    throw ShapeError(os.str());
  }
  TileGrid grid{image_size, window, stride, {}};
  for (auto y : axis_origins(image_size.height, window.height, stride)) {
    for (auto x : axis_origins(image_size.width, window.width, stride)) grid.origins.push_back({y, x});
  }
  return grid;
}

torch::Tensor stitch(const std::vector<TileProbabilities>& tiles, Size2 image_size) {
  if (tiles.empty()) throw ShapeError("stitch: no tiles");
  torch::Tensor sum;
  auto count = torch::zeros({image_size.height, image_size.width}, torch::kInt32);
  for (const auto& t : tiles) {
    auto p = t.probs.dim() == 4 ? t.probs.squeeze(0) : t.probs;
    if (p.dim() != 3) throw ShapeError("stitch: tile probabilities must be K x h x w");
    if (!sum.defined()) sum = torch::zeros({p.size(0), image_size.height, image_size.width}, p.options());
    const auto h = p.size(1);
    const auto w = p.size(2);
    if (t.origin.y < 0 || t.origin.x < 0 || t.origin.y + h > image_size.height ||
        t.origin.x + w > image_size.width || p.size(0) != sum.size(0)) {
      throw ShapeError("stitch: tile at (" + std::to_string(t.origin.y) + ", " + std::to_string(t.origin.x) +
                       ") does not fit the image");
    }
    using torch::indexing::Slice;
    sum.index({Slice(), Slice(t.origin.y, t.origin.y + h), Slice(t.origin.x, t.origin.x + w)}) += p;
    count.index({Slice(t.origin.y, t.origin.y + h), Slice(t.origin.x, t.origin.x + w)}) += 1;
  }
  if (count.eq(0).any().item<bool>()) throw ShapeError("stitch: tile grid leaves pixels uncovered");
  return sum / count.to(sum.scalar_type()).unsqueeze(0);
}

cv::Mat pad_to_window(const cv::Mat& image, Size2 window) {
  const int bottom = static_cast<int>(std::max<int64_t>(0, window.height - image.rows));
  const int right = static_cast<int>(std::max<int64_t>(0, window.width - image.cols));
  if (bottom == 0 && right == 0) return image;
  // reflection needs a source at least as large as the pad; fall back to edge replication
  const int mode = (bottom < image.rows && right < image.cols) ? cv::BORDER_REFLECT_101 : cv::BORDER_REPLICATE;
  cv::Mat out;
  cv::copyMakeBorder(image, out, 0, bottom, 0, right, mode);
  return out;
}

cv::Mat coverage_counts(const TileGrid& grid) {
  cv::Mat counts = cv::Mat::zeros(static_cast<int>(grid.image_size.height),
                                  static_cast<int>(grid.image_size.width), CV_32S);
  for (const auto& o : grid.origins) {
    cv::Rect r(static_cast<int>(o.x), static_cast<int>(o.y), static_cast<int>(grid.window.width),
               static_cast<int>(grid.window.height));
    counts(r) += 1;
  }
  return counts;
}

}  // namespace farseg
