// Copyright 2026 The fbaug Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fbaug/errors.hpp"

namespace fbaug {

/// Row-major interleaved raster. Width and height are at least 1 for any
/// raster that came out of a decoder; a default-constructed raster is empty.
template <typename T, int Channels>
class Raster {
 public:
  using value_type = T;
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw InvalidArgumentError("raster dimensions must be >= 1, got " +
                                 std::to_string(width) + "x" +
                                 std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
  }
  Raster(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1 ||
        data_.size() != static_cast<std::size_t>(width) * height * Channels) {
      throw InvalidArgumentError("raster buffer does not match " +
                                 std::to_string(width) + "x" +
                                 std::to_string(height) + "x" +
                                 std::to_string(Channels));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels;
  }

  T& at(int x, int y, int c = 0) noexcept { return data_[offset(x, y) + c]; }
  const T& at(int x, int y, int c = 0) const noexcept {
    return data_[offset(x, y) + c];
  }

  std::span<T> row(int y) noexcept {
    return {data_.data() + offset(0, y),
            static_cast<std::size_t>(width_) * Channels};
  }
  std::span<const T> row(int y) const noexcept {
    return {data_.data() + offset(0, y),
            static_cast<std::size_t>(width_) * Channels};
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// 8-bit RGB image. Normalized view of a sample is raw / 255.
using Image = Raster<std::uint8_t, 3>;
/// Per-pixel foreground probability in [0, 1].
using SaliencyMap = Raster<float, 1>;
/// 1 = foreground, 0 = background.
using BinaryMask = Raster<std::uint8_t, 1>;

inline constexpr double kDefaultTheta = 0.5;

inline double normalized(std::uint8_t sample) noexcept {
  return static_cast<double>(sample) / 255.0;
}

template <typename R>
std::string shape_string(const R& r) {
  return std::to_string(r.width()) + "x" + std::to_string(r.height());
}

/// bit = 1 iff value >= theta.
inline BinaryMask threshold_mask(const SaliencyMap& map,
                                 double theta = kDefaultTheta) {
  BinaryMask mask(map.width(), map.height());
  auto src = map.data();
  auto dst = mask.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<double>(src[i]) >= theta ? 1 : 0;
  }
  return mask;
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionMismatchError(std::string(what) + ": " + shape_string(a) +
                                 " vs " + shape_string(b));
  }
}

inline void validate_pair(const Image& img, const BinaryMask& mask) {
  if (img.width() != mask.width() || img.height() != mask.height()) {
    throw DimensionMismatchError("image is " + shape_string(img) +
                                 " but mask is " + shape_string(mask));
  }
}

}  // namespace fbaug
