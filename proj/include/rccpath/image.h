// Copyright 2026 The rccpath Authors. All Rights Reserved.
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

#ifndef RCCPATH_IMAGE_H_
#define RCCPATH_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rccpath {

/// Interleaved 8-bit RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h),
        pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

  bool empty() const { return width <= 0 || height <= 0; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
            static_cast<std::size_t>(x)) * 3;
  }
  std::uint8_t* at(int x, int y) { return pixels.data() + offset(x, y); }
  const std::uint8_t* at(int x, int y) const { return pixels.data() + offset(x, y); }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Top-left corner of a square read at one pyramid level, in that level's
/// pixel coordinates. Coordinates may fall outside the level; such reads are
/// zero-padded.
struct PatchCoordinate {
  int level = 0;
  std::int64_t x = 0;
  std::int64_t y = 0;
  int size = 0;

  friend bool operator==(const PatchCoordinate&, const PatchCoordinate&) = default;
  friend auto operator<=>(const PatchCoordinate&, const PatchCoordinate&) = default;
};

/// A square (or rectangular) crop handed to classifiers.
struct Patch {
  RgbImage image;
  PatchCoordinate origin;
  double mpp = 0.0;
  /// Set when part of the requested area fell outside the level.
  bool partial = false;

  int width() const { return image.width; }
  int height() const { return image.height; }
  std::span<const std::uint8_t> bytes() const { return image.pixels; }
};

/// Bilinear resize with pixel-center alignment.
RgbImage resize_bilinear(const RgbImage& src, int width, int height);

}  // namespace rccpath

#endif  // RCCPATH_IMAGE_H_
