#include "farseg/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "farseg/errors.hpp"

namespace farseg {

namespace fs = std::filesystem;

namespace {

constexpr std::array<float, 3> kMean{0.485f, 0.456f, 0.406f};
constexpr std::array<float, 3> kStd{0.229f, 0.224f, 0.225f};

bool is_raster(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".tif" || ext == ".tiff" || ext == ".bmp";
}

std::map<std::string, fs::path> rasters_by_stem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_raster(entry.path())) out[entry.path().stem().string()] = entry.path();
  }
  return out;
}

}  // namespace

void validate_sample(const LabeledSample& sample, int64_t num_classes, uint8_t ignore_label) {
  if (sample.image.empty() || sample.image.type() != CV_8UC3) {
    throw DataError(sample.name + ": image must be a non-empty 8-bit 3-channel raster");
  }
  if (sample.mask.type() != CV_8UC1) throw DataError(sample.name + ": mask must be a single-channel 8-bit raster");
  if (sample.image.size() != sample.mask.size()) {
    throw DataError(sample.name + ": image and mask sizes differ");
  }
  for (int y = 0; y < sample.mask.rows; ++y) {
    const auto* row = sample.mask.ptr<uint8_t>(y);
    for (int x = 0; x < sample.mask.cols; ++x) {
      if (row[x] >= num_classes && row[x] != ignore_label) {
        std::ostringstream os;
        os << sample.name << ": mask value " << int(row[x]) << " at (y=" << y << ", x=" << x
           << ") is not a class id below " << num_classes << " or the ignore label";
        throw DataError(os.str());
      }
    }
  }
}

cv::Mat read_image(const fs::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw DataError("cannot read image " + path.string());
  return img;
}

cv::Mat read_mask(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot read mask " + path.string());
  if (m.type() != CV_8UC1) throw DataError(path.string() + ": mask must be single-channel 8-bit");
  return m;
}

void write_png(const fs::path& path, const cv::Mat& raster) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), raster)) throw DataError("cannot write " + path.string());
}

LoadResult load_dataset(const fs::path& root, int64_t num_classes, bool strict) {
  LoadResult result;
  const auto images = rasters_by_stem(root / "images");
  const auto masks = rasters_by_stem(root / "masks");
  if (images.empty()) {
    result.report.warnings.push_back("no images found under " + (root / "images").string());
    std::cerr << "warning: " << result.report.warnings.back() << "\n";
    return result;
  }
  for (const auto& [stem, path] : masks) {
    if (!images.count(stem)) result.report.orphan_masks.push_back(stem);
  }
  for (const auto& [stem, image_path] : images) {
    auto it = masks.find(stem);
    if (it == masks.end()) {
      result.report.missing_masks.push_back(stem);
      continue;
    }
    LabeledSample s{stem, read_image(image_path), read_mask(it->second)};
    validate_sample(s, num_classes);
    result.samples.push_back(std::move(s));
  }
  if (strict && !result.report.missing_masks.empty()) {
    throw DataError("no mask for image '" + result.report.missing_masks.front() + "' (" +
                    std::to_string(result.report.missing_masks.size()) + " missing in total)");
  }
  return result;
}

LoadResult load_isaid(const fs::path& root, bool strict) { return load_dataset(root, kIsaidNumClasses, strict); }

void save_dataset(const Dataset& samples, const fs::path& root) {
  for (const auto& s : samples) {
    write_png(root / "images" / (s.name + ".png"), s.image);
    write_png(root / "masks" / (s.name + ".png"), s.mask);
  }
}

torch::Tensor image_to_tensor(const cv::Mat& image) {
  if (image.type() != CV_8UC3) throw DataError("image_to_tensor expects an 8-bit 3-channel image");
  cv::Mat rgb;
  cv::cvtColor(image, rgb, cv::COLOR_BGR2RGB);
  auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8)
               .permute({2, 0, 1})
               .to(torch::kFloat32)
               .div(255.0);
  auto mean = torch::tensor({kMean[0], kMean[1], kMean[2]}).view({3, 1, 1});
  auto std = torch::tensor({kStd[0], kStd[1], kStd[2]}).view({3, 1, 1});
  return ((t - mean) / std).contiguous();
}

torch::Tensor mask_to_tensor(const cv::Mat& mask) {
  if (mask.type() != CV_8UC1) throw DataError("mask_to_tensor expects a single-channel 8-bit mask");
  cv::Mat m = mask.isContinuous() ? mask : mask.clone();
  return torch::from_blob(m.data, {m.rows, m.cols}, torch::kUInt8).to(torch::kLong);
}

cv::Mat tensor_to_mask(const torch::Tensor& labels) {
  auto t = labels.to(torch::kUInt8).contiguous();
  cv::Mat m(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_8UC1);
  std::memcpy(m.data, t.data_ptr<uint8_t>(), static_cast<size_t>(t.numel()));
  return m;
}

ColorTable load_color_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open color table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed color table " + path.string() + ": " + e.what());
  }
  ColorTable table;
  for (const auto& entry : j.at("classes")) {
    const auto id = entry.at("id").get<int>();
    const auto rgb = entry.at("rgb").get<std::array<int, 3>>();
    table.rgb_to_id[{static_cast<uint8_t>(rgb[0]), static_cast<uint8_t>(rgb[1]), static_cast<uint8_t>(rgb[2])}] =
        static_cast<uint8_t>(id);
    if (table.class_names.size() <= static_cast<size_t>(id)) table.class_names.resize(id + 1);
    table.class_names[id] = entry.at("name").get<std::string>();
  }
  return table;
}

cv::Mat convert_color_mask(const cv::Mat& color_mask, const ColorTable& table) {
  if (color_mask.type() != CV_8UC3) throw DataError("color mask must be an 8-bit 3-channel raster");
  cv::Mat out(color_mask.size(), CV_8UC1);
  for (int y = 0; y < color_mask.rows; ++y) {
    const auto* src = color_mask.ptr<cv::Vec3b>(y);
    auto* dst = out.ptr<uint8_t>(y);
    for (int x = 0; x < color_mask.cols; ++x) {
      const std::array<uint8_t, 3> rgb{src[x][2], src[x][1], src[x][0]};
      auto it = table.rgb_to_id.find(rgb);
      if (it == table.rgb_to_id.end()) {
        std::ostringstream os;
        os << "unknown mask color RGB(" << int(rgb[0]) << ", " << int(rgb[1]) << ", " << int(rgb[2]) << ") at (y=" << y
           << ", x=" << x << ")";
        throw DataError(os.str());
      }
      dst[x] = it->second;
    }
  }
  return out;
}

}  // namespace farseg
