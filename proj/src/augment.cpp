#include "farseg/augment.hpp"

#include <opencv2/core.hpp>

namespace farseg {

std::string to_string(Transform t) {
  switch (t) {
    case Transform::kIdentity: return "identity";
    case Transform::kRot90: return "rot90";
    case Transform::kRot180: return "rot180";
    case Transform::kRot270: return "rot270";
    case Transform::kHFlip: return "hflip";
    case Transform::kVFlip: return "vflip";
    case Transform::kTranspose: return "transpose";
    case Transform::kAntiTranspose: return "anti_transpose";
  }
  return "identity";
}

cv::Mat apply_transform(const cv::Mat& raster, Transform t) {
  cv::Mat out;
  switch (t) {
    case Transform::kIdentity: out = raster.clone(); break;
    case Transform::kRot90: cv::rotate(raster, out, cv::ROTATE_90_COUNTERCLOCKWISE); break;
    case Transform::kRot180: cv::rotate(raster, out, cv::ROTATE_180); break;
    case Transform::kRot270: cv::rotate(raster, out, cv::ROTATE_90_CLOCKWISE); break;
    case Transform::kHFlip: cv::flip(raster, out, 1); break;
    case Transform::kVFlip: cv::flip(raster, out, 0); break;
    case Transform::kTranspose: cv::transpose(raster, out); break;
    case Transform::kAntiTranspose: cv::rotate(raster, out, cv::ROTATE_180); cv::transpose(out, out); break;
  }
  return out;
}

uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Transform draw_transform(uint64_t seed, uint64_t epoch, uint64_t index) {
  const uint64_t h = mix_seed(mix_seed(mix_seed(seed) ^ epoch) ^ index);
  return static_cast<Transform>(h % kNumTransforms);
}

LabeledSample apply_transform(const LabeledSample& sample, Transform t) {
  return {sample.name, apply_transform(sample.image, t), apply_transform(sample.mask, t)};
}

LabeledSample augment(const LabeledSample& sample, uint64_t seed) {
  return apply_transform(sample, static_cast<Transform>(mix_seed(seed) % kNumTransforms));
}

}  // namespace farseg
