#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace farseg {

inline constexpr uint8_t kIgnoreLabel = 255;
inline constexpr int64_t kIsaidNumClasses = 16;

/// 8-bit 3-channel image (BGR, as stored by OpenCV) and its 8-bit class-id mask.
struct LabeledSample {
  std::string name;
  cv::Mat image;
  cv::Mat mask;
};

using Dataset = std::vector<LabeledSample>;

struct LoadReport {
  std::vector<std::string> missing_masks;   // image stems without a mask
  std::vector<std::string> orphan_masks;    // mask stems without an image
  std::vector<std::string> warnings;
};

struct LoadResult {
  Dataset samples;
  LoadReport report;
};

/// Throws DataError when sizes differ or a mask value is >= num_classes and not ignore.
void validate_sample(const LabeledSample& sample, int64_t num_classes, uint8_t ignore_label = kIgnoreLabel);

/// Reads root/images and root/masks, pairing files by stem. In strict mode any
/// unpaired image aborts the load.
LoadResult load_dataset(const std::filesystem::path& root, int64_t num_classes, bool strict = false);

/// load_dataset with the 16-class (15 categories + background) layout.
LoadResult load_isaid(const std::filesystem::path& root, bool strict = false);

/// Writes root/images/<name>.png and root/masks/<name>.png.
void save_dataset(const Dataset& samples, const std::filesystem::path& root);

cv::Mat read_image(const std::filesystem::path& path);
cv::Mat read_mask(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const cv::Mat& raster);

/// HWC uint8 BGR -> 3 x H x W float RGB, normalized with ImageNet statistics.
torch::Tensor image_to_tensor(const cv::Mat& image);
/// H x W uint8 -> H x W int64.
torch::Tensor mask_to_tensor(const cv::Mat& mask);
/// H x W integer tensor -> uint8 cv::Mat.
cv::Mat tensor_to_mask(const torch::Tensor& labels);

/// Color-coded semantic mask palette (RGB triple -> class id).
struct ColorTable {
  std::map<std::array<uint8_t, 3>, uint8_t> rgb_to_id;
  std::vector<std::string> class_names;
};

ColorTable load_color_table(const std::filesystem::path& path);
/// Converts an RGB color mask (stored BGR by OpenCV) into class ids. Unknown colors
/// raise DataError naming the RGB triple.
cv::Mat convert_color_mask(const cv::Mat& color_mask, const ColorTable& table);

}  // namespace farseg
