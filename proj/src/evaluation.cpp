#include "farseg/evaluation.hpp"

#include <sstream>

#include "farseg/errors.hpp"

namespace farseg {

ConfusionMatrix::ConfusionMatrix(int64_t num_classes, std::optional<int64_t> ignore_label)
    : num_classes_(num_classes),
      ignore_label_(ignore_label),
      counts_(static_cast<size_t>(num_classes * num_classes), 0) {
  if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
}

void ConfusionMatrix::accumulate(std::span<const int64_t> pred, std::span<const int64_t> gt) {
  if (pred.size() != gt.size()) throw ShapeError("prediction and ground truth differ in size");
  for (size_t i = 0; i < gt.size(); ++i) {
    const auto g = gt[i];
    if (ignore_label_ && g == *ignore_label_) continue;
    const auto p = pred[i];
    if (g < 0 || g >= num_classes_ || p < 0 || p >= num_classes_) {
      throw DataError("label out of range at pixel " + std::to_string(i) + " (gt " + std::to_string(g) +
                      ", pred " + std::to_string(p) + ")");
    }
    ++counts_[static_cast<size_t>(g * num_classes_ + p)];
  }
}

void ConfusionMatrix::accumulate(const torch::Tensor& pred, const torch::Tensor& gt) {
  if (pred.sizes() != gt.sizes()) {
    std::ostringstream os;
    os << "prediction " << pred.sizes() << " and ground truth " << gt.sizes() << " differ in shape";
    throw ShapeError(os.str());
  }
  auto p = pred.to(torch::kLong).contiguous();
  auto g = gt.to(torch::kLong).contiguous();
  const auto n = static_cast<size_t>(p.numel());
  accumulate(std::span<const int64_t>(p.data_ptr<int64_t>(), n), std::span<const int64_t>(g.data_ptr<int64_t>(), n));
}

void ConfusionMatrix::accumulate(const cv::Mat& pred, const cv::Mat& gt) {
  if (pred.size() != gt.size()) throw ShapeError("prediction and ground truth rasters differ in size");
  accumulate(mask_to_tensor(pred), mask_to_tensor(gt));
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw ShapeError("cannot merge confusion matrices of different sizes");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

uint64_t ConfusionMatrix::total() const {
  uint64_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::vector<uint64_t> ConfusionMatrix::gt_pixels() const {
  std::vector<uint64_t> out(static_cast<size_t>(num_classes_), 0);
  for (int64_t g = 0; g < num_classes_; ++g) {
    for (int64_t p = 0; p < num_classes_; ++p) out[g] += at(g, p);
  }
  return out;
}

std::vector<std::optional<double>> ConfusionMatrix::iou_per_class() const {
  std::vector<std::optional<double>> out(static_cast<size_t>(num_classes_));
  for (int64_t k = 0; k < num_classes_; ++k) {
    uint64_t row = 0, col = 0;
    for (int64_t j = 0; j < num_classes_; ++j) {
      row += at(k, j);
      col += at(j, k);
    }
    const uint64_t tp = at(k, k);
    const uint64_t uni = row + col - tp;
    if (uni > 0) out[k] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return out;
}

double ConfusionMatrix::mean_iou(bool include_background) const {
  const auto iou = iou_per_class();
  double sum = 0.0;
  int n = 0;
  for (size_t k = include_background ? 0 : 1; k < iou.size(); ++k) {
    if (iou[k]) {
      sum += *iou[k];
      ++n;
    }
  }
  if (n == 0) throw DataError("mean IoU undefined: no class appears in ground truth or prediction");
  return sum / n;
}

double foreground_ratio(const cv::Mat& mask, uint8_t ignore_label) {
  int64_t fg = 0, valid = 0;
  for (int y = 0; y < mask.rows; ++y) {
    const auto* row = mask.ptr<uint8_t>(y);
    for (int x = 0; x < mask.cols; ++x) {
      if (row[x] == ignore_label) continue;
      ++valid;
      fg += row[x] != 0 ? 1 : 0;
    }
  }
  return valid == 0 ? 0.0 : static_cast<double>(fg) / static_cast<double>(valid);
}

ForegroundStats foreground_ratio(const Dataset& dataset, uint8_t ignore_label) {
  ForegroundStats out;
  int64_t fg = 0, valid = 0;
  for (const auto& s : dataset) {
    int64_t img_fg = 0, img_valid = 0;
    for (int y = 0; y < s.mask.rows; ++y) {
      const auto* row = s.mask.ptr<uint8_t>(y);
      for (int x = 0; x < s.mask.cols; ++x) {
        if (row[x] == ignore_label) continue;
        ++img_valid;
        img_fg += row[x] != 0 ? 1 : 0;
      }
    }
    out.per_image.push_back(img_valid == 0 ? 0.0 : static_cast<double>(img_fg) / static_cast<double>(img_valid));
    fg += img_fg;
    valid += img_valid;
  }
  out.aggregate = valid == 0 ? 0.0 : static_cast<double>(fg) / static_cast<double>(valid);
  return out;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json mean_or_null(const ConfusionMatrix& cm, bool include_background) {
  try {
    return cm.mean_iou(include_background);
  } catch (const DataError&) {
    return nullptr;
  }
}

}  // namespace

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json per_class = nlohmann::json::array();
  const auto iou = confusion.iou_per_class();
  const auto gt = confusion.gt_pixels();
  for (size_t k = 0; k < iou.size(); ++k) {
    per_class.push_back({{"class", k},
                         {"name", k < class_names.size() ? class_names[k] : std::to_string(k)},
                         {"iou", optional_json(iou[k])},
                         {"gt_pixels", gt[k]}});
  }
  std::vector<std::vector<uint64_t>> matrix(static_cast<size_t>(confusion.num_classes()));
  for (int64_t g = 0; g < confusion.num_classes(); ++g) {
    for (int64_t p = 0; p < confusion.num_classes(); ++p) matrix[g].push_back(confusion.at(g, p));
  }
  return {{"num_classes", confusion.num_classes()},
          {"num_images", per_image.size()},
          {"evaluated_pixels", confusion.total()},
          {"miou", mean_or_null(confusion, true)},
          {"miou_foreground", mean_or_null(confusion, false)},
          {"per_class", per_class},
          {"foreground_ratio", foreground_ratio},
          {"confusion_matrix", matrix}};
}

std::string EvaluationReport::per_image_csv() const {
  std::ostringstream os;
  os << "image";
  for (int64_t k = 0; k < confusion.num_classes(); ++k) {
    os << "," << (static_cast<size_t>(k) < class_names.size() ? class_names[k] : "class" + std::to_string(k));
  }
  os << "\n";
  for (const auto& row : per_image) {
    os << row.name;
    for (const auto& v : row.iou) {
      os << ",";
      if (v) os << *v;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace farseg
