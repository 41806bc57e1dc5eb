#pragma once

#include <cstdint>
#include <string>

#include <opencv2/core.hpp>

#include "farseg/dataset.hpp"

namespace farseg {

/// The eight symmetries of the square: rotations by 90*k and their
/// compositions with a horizontal flip.
enum class Transform : int {
  kIdentity = 0,
  kRot90 = 1,
  kRot180 = 2,
  kRot270 = 3,
  kHFlip = 4,
  kVFlip = 5,
  kTranspose = 6,      // h-flip after rot90
  kAntiTranspose = 7,  // h-flip after rot270
};

inline constexpr int kNumTransforms = 8;

std::string to_string(Transform t);

/// Rotations are counter-clockwise.
cv::Mat apply_transform(const cv::Mat& raster, Transform t);

/// Deterministic transform for (seed, epoch, index); independent of worker scheduling.
Transform draw_transform(uint64_t seed, uint64_t epoch, uint64_t index);

/// Same geometric transform applied to image and mask.
LabeledSample apply_transform(const LabeledSample& sample, Transform t);

/// Uniform draw over the eight transforms from `seed`.
LabeledSample augment(const LabeledSample& sample, uint64_t seed);

/// splitmix64 finalizer.
uint64_t mix_seed(uint64_t x);

}  // namespace farseg
