#pragma once

#include <array>
#include <string>

#include "farseg/errors.hpp"

namespace farseg {

inline constexpr int kMinLevel = 2;
inline constexpr int kMaxLevel = 5;
inline constexpr int kNumLevels = kMaxLevel - kMinLevel + 1;
inline constexpr std::array<int, kNumLevels> kLevels{2, 3, 4, 5};

inline void check_level(int level) {
  if (level < kMinLevel || level > kMaxLevel) {
    throw ConfigError("pyramid level " + std::to_string(level) + " outside [2, 5]");
  }
}

/// Output stride of a pyramid level: 2^level.
inline constexpr int level_stride(int level) { return 1 << level; }

/// Fixed-size map from pyramid level {2,3,4,5} to a value.
template <typename T>
class LevelMap {
 public:
  T& operator[](int level) {
    check_level(level);
    return items_[level - kMinLevel];
  }
  const T& operator[](int level) const {
    check_level(level);
    return items_[level - kMinLevel];
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::array<T, kNumLevels> items_{};
};

}  // namespace farseg
