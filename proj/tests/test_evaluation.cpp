#include <doctest.h>

#include <numeric>
#include <random>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "farseg/errors.hpp"
#include "farseg/evaluation.hpp"
#include "support/reference_iou.hpp"

using namespace farseg;

namespace {

std::vector<int64_t> random_labels(size_t n, int64_t k, uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int64_t> d(0, k - 1);
  std::vector<int64_t> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("hand-counted two-class example") {
  ConfusionMatrix cm(2);
  const std::vector<int64_t> gt{1, 1, 0, 0}, pred{1, 0, 0, 0};
  cm.accumulate(pred, gt);
  auto iou = cm.iou_per_class();
  CHECK(std::abs(*iou[1] - 0.5) < 1e-12);
  CHECK(std::abs(*iou[0] - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(cm.mean_iou() - (0.5 + 2.0 / 3.0) / 2) < 1e-12);
  CHECK(std::abs(cm.mean_iou(false) - 0.5) < 1e-12);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.total() == 4);
  CHECK(cm.gt_pixels() == std::vector<uint64_t>{2, 2});
}

TEST_CASE("perfect prediction fills only the diagonal") {
  ConfusionMatrix cm(4);
  auto gt = random_labels(500, 3, 1);
  cm.accumulate(gt, gt);
  for (int64_t g = 0; g < 4; ++g)
    for (int64_t p = 0; p < 4; ++p)
      if (g != p) CHECK(cm.at(g, p) == 0);
  auto iou = cm.iou_per_class();
  for (int k = 0; k < 3; ++k) CHECK(*iou[k] == 1.0);
  CHECK_FALSE(iou[3].has_value());
  CHECK(cm.mean_iou() == 1.0);
}

TEST_CASE("ignored pixels are skipped") {
  ConfusionMatrix cm(3);
  const std::vector<int64_t> gt(10, 255), pred(10, 1);
  cm.accumulate(pred, gt);
  CHECK(cm.total() == 0);
  CHECK(cm == ConfusionMatrix(3));
  CHECK_THROWS_AS(cm.mean_iou(), DataError);
}

TEST_CASE("merging equals sequential accumulation") {
  auto gt_a = random_labels(300, 5, 2), pred_a = random_labels(300, 5, 3);
  auto gt_b = random_labels(200, 5, 4), pred_b = random_labels(200, 5, 5);
  ConfusionMatrix a(5), b(5), seq(5);
  a.accumulate(pred_a, gt_a);
  b.accumulate(pred_b, gt_b);
  seq.accumulate(pred_a, gt_a);
  seq.accumulate(pred_b, gt_b);
  CHECK(a + b == seq);
  CHECK(seq.total() == 500);
  ConfusionMatrix other(4);
  CHECK_THROWS_AS(a += other, ShapeError);
}

TEST_CASE("input validation") {
  ConfusionMatrix cm(3);
  CHECK_THROWS_AS(cm.accumulate(std::vector<int64_t>{0, 1}, std::vector<int64_t>{0}), ShapeError);
  CHECK_THROWS_AS(cm.accumulate(torch::zeros({2, 3}), torch::zeros({3, 2})), ShapeError);
  CHECK_THROWS_AS(cm.accumulate(cv::Mat::zeros(2, 3, CV_8UC1), cv::Mat::zeros(3, 2, CV_8UC1)), ShapeError);
  CHECK_THROWS_AS(cm.accumulate(std::vector<int64_t>{3}, std::vector<int64_t>{0}), DataError);
}

TEST_CASE("IoU and mIoU stay in the unit interval") {
  for (uint32_t seed = 0; seed < 20; ++seed) {
    ConfusionMatrix cm(6);
    cm.accumulate(random_labels(400, 6, seed), random_labels(400, 6, seed + 100));
    for (const auto& v : cm.iou_per_class())
      if (v) {
        CHECK(*v >= 0.0);
        CHECK(*v <= 1.0);
      }
    CHECK(cm.mean_iou() >= 0.0);
    CHECK(cm.mean_iou() <= 1.0);
  }
}

TEST_CASE("mIoU is invariant under relabeling classes") {
  const int64_t k = 5;
  auto gt = random_labels(1000, k, 7), pred = random_labels(1000, k, 8);
  for (size_t i = 0; i < gt.size(); i += 3) pred[i] = gt[i];
  std::vector<int64_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937(9));
  auto gt2 = gt, pred2 = pred;
  for (auto& x : gt2) x = perm[x];
  for (auto& x : pred2) x = perm[x];
  ConfusionMatrix a(k), b(k);
  a.accumulate(pred, gt);
  b.accumulate(pred2, gt2);
  auto ia = a.iou_per_class(), ib = b.iou_per_class();
  for (int64_t c = 0; c < k; ++c) CHECK(ia[c] == ib[perm[c]]);
  CHECK(a.mean_iou() == doctest::Approx(b.mean_iou()).epsilon(1e-14));
}

TEST_CASE("evaluating non-overlapping tiles equals whole-image evaluation") {
  torch::manual_seed(0);
  auto gt = torch::randint(0, 4, {64, 96}, torch::kLong);
  auto pred = torch::randint(0, 4, {64, 96}, torch::kLong);
  gt.index_put_({torch::indexing::Slice(0, 5), torch::indexing::Slice()}, 255);
  ConfusionMatrix whole(4), tiled(4);
  whole.accumulate(pred, gt);
  using torch::indexing::Slice;
  for (int64_t y = 0; y < 64; y += 32)
    for (int64_t x = 0; x < 96; x += 32) {
      ConfusionMatrix part(4);
      part.accumulate(pred.index({Slice(y, y + 32), Slice(x, x + 32)}), gt.index({Slice(y, y + 32), Slice(x, x + 32)}));
      tiled += part;
    }
  CHECK(tiled == whole);
  CHECK(tiled.mean_iou() == whole.mean_iou());
}

TEST_CASE("foreground ratio") {
  CHECK(foreground_ratio(cv::Mat::zeros(4, 4, CV_8UC1)) == 0.0);
  CHECK(foreground_ratio(cv::Mat(4, 4, CV_8UC1, cv::Scalar(3))) == 1.0);
  cv::Mat m = cv::Mat::zeros(2, 2, CV_8UC1);
  m.at<uint8_t>(0, 0) = 2;
  m.at<uint8_t>(1, 1) = 255;
  CHECK(foreground_ratio(m) == doctest::Approx(1.0 / 3));
  Dataset d{{"a", cv::Mat(), cv::Mat::zeros(2, 2, CV_8UC1)}, {"b", cv::Mat(), m}};
  auto stats = foreground_ratio(d);
  CHECK(stats.per_image == std::vector<double>{0.0, 1.0 / 3});
  CHECK(stats.aggregate == doctest::Approx(1.0 / 7));
}

TEST_CASE("report serialization") {
  EvaluationReport report{ConfusionMatrix(3), {}, 0.25, {"bg", "car", "ship"}};
  report.confusion.accumulate(std::vector<int64_t>{0, 1, 1, 0}, std::vector<int64_t>{0, 1, 0, 0});
  report.per_image.push_back({"img0", report.confusion.iou_per_class()});
  auto j = report.to_json();
  CHECK(j["num_classes"] == 3);
  CHECK(j["evaluated_pixels"] == 4);
  CHECK(j["per_class"][1]["name"] == "car");
  CHECK(j["per_class"][2]["iou"].is_null());
  CHECK(j["miou"].get<double>() == doctest::Approx(report.confusion.mean_iou()));
  CHECK(j["miou_foreground"].get<double>() == doctest::Approx(0.5));
  CHECK(j["foreground_ratio"] == 0.25);
  const auto csv = report.per_image_csv();
  CHECK(csv.rfind("image,bg,car,ship\n", 0) == 0);
  CHECK(csv.find("img0,") != std::string::npos);
  CHECK(csv.back() == '\n');
  CHECK(csv.find(",\n") != std::string::npos);  // undefined IoU is an empty cell
}

TEST_CASE("reference per-category IoUs imply a background-inclusive mean") {
  const double sum = std::accumulate(reference::kForegroundIou.begin(), reference::kForegroundIou.end(), 0.0);
  const double foreground_mean = sum / 15.0;
  CHECK(foreground_mean == doctest::Approx(61.368).epsilon(1e-9));
  CHECK(foreground_mean < reference::kReferenceMiou);
  const double background = 16.0 * reference::kReferenceMiou - sum;
  CHECK(background == doctest::Approx(98.84).epsilon(1e-9));
  CHECK(background <= 100.0);
  CHECK(background > *std::max_element(reference::kForegroundIou.begin(), reference::kForegroundIou.end()));
}
