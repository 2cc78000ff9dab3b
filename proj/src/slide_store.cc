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

#include "rccpath/slide_store.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <string>

#include "rccpath/error.h"

namespace rccpath {
namespace {

int ceil_div(std::int64_t a, std::int64_t b) { return static_cast<int>((a + b - 1) / b); }

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

Level make_level(const RgbImage& image, int index, int tile_size) {
  Level level;
  level.index = index;
  level.width = image.width;
  level.height = image.height;
  level.tile_size = tile_size;
  level.tile_cols = ceil_div(image.width, tile_size);
  level.tile_rows = ceil_div(image.height, tile_size);
  const std::size_t tile_bytes = static_cast<std::size_t>(tile_size) * tile_size * 3;
  level.tiles.resize(static_cast<std::size_t>(level.tile_cols) * level.tile_rows);
  for (int row = 0; row < level.tile_rows; ++row) {
    for (int col = 0; col < level.tile_cols; ++col) {
      std::vector<std::uint8_t> tile(tile_bytes, 0);
      const int x0 = col * tile_size;
      const int y0 = row * tile_size;
      const int w = std::min(tile_size, image.width - x0);
      const int h = std::min(tile_size, image.height - y0);
      for (int y = 0; y < h; ++y) {
        std::memcpy(tile.data() + static_cast<std::size_t>(y) * tile_size * 3,
                    image.at(x0, y0 + y), static_cast<std::size_t>(w) * 3);
      }
      level.tiles[static_cast<std::size_t>(row) * level.tile_cols + col] = std::move(tile);
    }
  }
  return level;
}

// Tissue optical density of every 8-bit channel value.
const std::array<double, 256>& od_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int v = 0; v < 256; ++v) t[v] = -std::log10((v + 1) / 256.0);
    return t;
  }();
  return table;
}

}  // namespace

SlidePyramid::SlidePyramid(SlideInfo info, std::vector<Level> levels)
    : info_(std::move(info)), levels_(std::move(levels)) {
  require(info_.mpp_base > 0.0, ErrorCode::kInvalidInput, "mpp_base must be positive");
  require(is_power_of_two(info_.tile_size), ErrorCode::kInvalidInput,
          "tile_size must be a power of two");
  require(!levels_.empty(), ErrorCode::kInvalidInput, "pyramid has no levels");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const Level& l = levels_[i];
    require(l.index == static_cast<int>(i), ErrorCode::kInvalidInput, "level indices out of order");
    require(l.width > 0 && l.height > 0, ErrorCode::kInvalidInput, "zero-area level");
    require(l.tile_size == info_.tile_size, ErrorCode::kInvalidInput, "tile size mismatch");
    require(l.tile_cols == ceil_div(l.width, l.tile_size) &&
                l.tile_rows == ceil_div(l.height, l.tile_size) &&
                l.tiles.size() == static_cast<std::size_t>(l.tile_cols) * l.tile_rows,
            ErrorCode::kInvalidInput, "tile grid does not cover level " + std::to_string(i));
    if (i > 0) {
      const Level& prev = levels_[i - 1];
      require(l.width == ceil_div(prev.width, 2) && l.height == ceil_div(prev.height, 2),
              ErrorCode::kInvalidInput, "level " + std::to_string(i) + " is not a 2x reduction");
    }
  }
  const Level& last = levels_.back();
  require(std::max(last.width, last.height) <= info_.tile_size, ErrorCode::kInvalidInput,
          "coarsest level exceeds one tile");
}

const Level& SlidePyramid::level(int index) const {
  require(has_level(index), ErrorCode::kInvalidInput,
          "level " + std::to_string(index) + " does not exist");
  return levels_[static_cast<std::size_t>(index)];
}

double SlidePyramid::mpp_at(int level) const {
  return info_.mpp_base * std::ldexp(1.0, level);
}

double SlidePyramid::magnification_at(int level) const {
  return info_.magnification_base / std::ldexp(1.0, level);
}

std::optional<int> SlidePyramid::level_for_mpp(double target_mpp) const {
  for (int i = 0; i < level_count(); ++i) {
    if (std::abs(mpp_at(i) - target_mpp) <= 1e-6 * target_mpp) return i;
  }
  return std::nullopt;
}

std::optional<int> SlidePyramid::level_for_magnification(double magnification) const {
  if (!(magnification > 0.0)) return std::nullopt;
  return level_for_mpp(info_.mpp_base * info_.magnification_base / magnification);
}

RgbImage downsample_2x(const RgbImage& image) {
  require(!image.empty(), ErrorCode::kInvalidInput, "downsample of empty image");
  RgbImage out((image.width + 1) / 2, (image.height + 1) / 2);
  for (int y = 0; y < out.height; ++y) {
    const int sy0 = 2 * y;
    const int sy1 = std::min(sy0 + 1, image.height - 1);
    const unsigned ny = (sy1 != sy0) ? 2 : 1;
    for (int x = 0; x < out.width; ++x) {
      const int sx0 = 2 * x;
      const int sx1 = std::min(sx0 + 1, image.width - 1);
      const unsigned nx = (sx1 != sx0) ? 2 : 1;
      const unsigned n = nx * ny;
      std::uint8_t* dst = out.at(x, y);
      for (int c = 0; c < 3; ++c) {
        unsigned sum = image.at(sx0, sy0)[c];
        if (nx == 2) sum += image.at(sx1, sy0)[c];
        if (ny == 2) sum += image.at(sx0, sy1)[c];
        if (n == 4) sum += image.at(sx1, sy1)[c];
        dst[c] = static_cast<std::uint8_t>((sum + n / 2) / n);
      }
    }
  }
  return out;
}

SlidePyramid ingest_base_image(const RgbImage& image, const IngestOptions& options) {
  require(!image.empty(), ErrorCode::kInvalidInput, "zero-area image");
  require(image.pixels.size() == image.pixel_count() * 3, ErrorCode::kInvalidInput,
          "pixel buffer length does not match dimensions");
  require(options.mpp_base > 0.0, ErrorCode::kInvalidInput, "mpp_base must be positive");
  require(options.magnification_base > 0.0, ErrorCode::kInvalidInput,
          "magnification_base must be positive");
  require(is_power_of_two(options.tile_size) && options.tile_size >= 64,
          ErrorCode::kInvalidInput, "tile_size must be a power of two >= 64");

  std::vector<Level> levels;
  levels.push_back(make_level(image, 0, options.tile_size));
  if (std::max(image.width, image.height) > options.tile_size) {
    RgbImage current = downsample_2x(image);
    for (int index = 1;; ++index) {
      levels.push_back(make_level(current, index, options.tile_size));
      if (std::max(current.width, current.height) <= options.tile_size) break;
      current = downsample_2x(current);
    }
  }

  SlideInfo info{options.slide_id, options.case_id,    options.mpp_base,
                 options.magnification_base, options.tile_size, options.ground_truth};
  return SlidePyramid(std::move(info), std::move(levels));
}

Patch read_region(const SlidePyramid& pyramid, const PatchCoordinate& coord) {
  const Level& level = pyramid.level(coord.level);
  require(coord.size > 0, ErrorCode::kInvalidInput, "patch size must be positive");

  Patch patch;
  patch.origin = coord;
  patch.mpp = pyramid.mpp_at(coord.level);
  patch.image = RgbImage(coord.size, coord.size, 0);

  const std::int64_t x_end = coord.x + coord.size;
  const std::int64_t y_end = coord.y + coord.size;
  patch.partial = coord.x < 0 || coord.y < 0 || x_end > level.width || y_end > level.height;

  const std::int64_t ix0 = std::max<std::int64_t>(coord.x, 0);
  const std::int64_t iy0 = std::max<std::int64_t>(coord.y, 0);
  const std::int64_t ix1 = std::min<std::int64_t>(x_end, level.width);
  const std::int64_t iy1 = std::min<std::int64_t>(y_end, level.height);
  if (ix0 >= ix1 || iy0 >= iy1) return patch;

  const int ts = level.tile_size;
  for (int row = static_cast<int>(iy0 / ts); row <= static_cast<int>((iy1 - 1) / ts); ++row) {
    for (int col = static_cast<int>(ix0 / ts); col <= static_cast<int>((ix1 - 1) / ts); ++col) {
      const std::vector<std::uint8_t>& tile = level.tile(row, col);
      const std::int64_t tx0 = std::max<std::int64_t>(ix0, static_cast<std::int64_t>(col) * ts);
      const std::int64_t tx1 = std::min<std::int64_t>(ix1, static_cast<std::int64_t>(col + 1) * ts);
      const std::int64_t ty0 = std::max<std::int64_t>(iy0, static_cast<std::int64_t>(row) * ts);
      const std::int64_t ty1 = std::min<std::int64_t>(iy1, static_cast<std::int64_t>(row + 1) * ts);
      const std::size_t run = static_cast<std::size_t>(tx1 - tx0) * 3;
      for (std::int64_t y = ty0; y < ty1; ++y) {
        const std::size_t src = (static_cast<std::size_t>(y - static_cast<std::int64_t>(row) * ts) * ts +
                                 static_cast<std::size_t>(tx0 - static_cast<std::int64_t>(col) * ts)) * 3;
        std::memcpy(patch.image.at(static_cast<int>(tx0 - coord.x), static_cast<int>(y - coord.y)),
                    tile.data() + src, run);
      }
    }
  }
  return patch;
}

RgbImage read_level(const SlidePyramid& pyramid, int level_index) {
  const Level& level = pyramid.level(level_index);
  RgbImage out(level.width, level.height);
  const int ts = level.tile_size;
  for (int row = 0; row < level.tile_rows; ++row) {
    for (int col = 0; col < level.tile_cols; ++col) {
      const auto& tile = level.tile(row, col);
      const int w = std::min(ts, level.width - col * ts);
      const int h = std::min(ts, level.height - row * ts);
      for (int y = 0; y < h; ++y) {
        std::memcpy(out.at(col * ts, row * ts + y),
                    tile.data() + static_cast<std::size_t>(y) * ts * 3,
                    static_cast<std::size_t>(w) * 3);
      }
    }
  }
  return out;
}

std::size_t BinaryMask::true_count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

double BinaryMask::true_fraction() const {
  return cells.empty() ? 0.0 : static_cast<double>(true_count()) / static_cast<double>(cells.size());
}

double tissue_optical_density(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const auto& od = od_table();
  return (od[r] + od[g] + od[b]) / 3.0;
}

BinaryMask tissue_mask(const SlidePyramid& pyramid, int level_index, double od_threshold,
                       int stride) {
  const Level& level = pyramid.level(level_index);
  require(od_threshold > 0.0 && od_threshold < 3.0, ErrorCode::kInvalidInput,
          "od_threshold must lie in (0, 3)");
  require(stride > 0, ErrorCode::kInvalidInput, "mask stride must be positive");

  BinaryMask mask;
  mask.level = level_index;
  mask.stride = stride;
  mask.level_width = level.width;
  mask.level_height = level.height;
  mask.cols = ceil_div(level.width, stride);
  mask.rows = ceil_div(level.height, stride);
  const std::size_t n_cells = static_cast<std::size_t>(mask.cols) * mask.rows;

  // Channel-summed OD per cell; the mean divides by 3 * pixel count.
  std::vector<double> od_sum(n_cells, 0.0);
  const auto& od = od_table();
  const int ts = level.tile_size;
  for (int row = 0; row < level.tile_rows; ++row) {
    for (int col = 0; col < level.tile_cols; ++col) {
      const auto& tile = level.tile(row, col);
      const int w = std::min(ts, level.width - col * ts);
      const int h = std::min(ts, level.height - row * ts);
      for (int y = 0; y < h; ++y) {
        const int gy = row * ts + y;
        double* cell_row = od_sum.data() + static_cast<std::size_t>(gy / stride) * mask.cols;
        const std::uint8_t* px = tile.data() + static_cast<std::size_t>(y) * ts * 3;
        for (int x = 0; x < w; ++x, px += 3) {
          const int gx = col * ts + x;
          cell_row[gx / stride] += od[px[0]] + od[px[1]] + od[px[2]];
        }
      }
    }
  }

  mask.cells.assign(n_cells, 0);
  for (int r = 0; r < mask.rows; ++r) {
    const int ch = std::min(stride, level.height - r * stride);
    for (int c = 0; c < mask.cols; ++c) {
      const int cw = std::min(stride, level.width - c * stride);
      const std::size_t idx = static_cast<std::size_t>(r) * mask.cols + c;
      const double mean = od_sum[idx] / (3.0 * cw * ch);
      mask.cells[idx] = mean >= od_threshold ? 1 : 0;
    }
  }
  return mask;
}

double tissue_fraction(const BinaryMask& mask, const PatchCoordinate& coord) {
  require(coord.size > 0, ErrorCode::kInvalidInput, "patch size must be positive");
  const std::int64_t x0 = std::max<std::int64_t>(coord.x, 0);
  const std::int64_t y0 = std::max<std::int64_t>(coord.y, 0);
  const std::int64_t x1 = std::min<std::int64_t>(coord.x + coord.size, mask.level_width);
  const std::int64_t y1 = std::min<std::int64_t>(coord.y + coord.size, mask.level_height);
  if (x0 >= x1 || y0 >= y1) return 0.0;

  const std::int64_t s = mask.stride;
  std::int64_t covered = 0;
  for (std::int64_t r = y0 / s; r <= (y1 - 1) / s; ++r) {
    const std::int64_t oy = std::min(y1, (r + 1) * s) - std::max(y0, r * s);
    for (std::int64_t c = x0 / s; c <= (x1 - 1) / s; ++c) {
      if (!mask.at(static_cast<int>(c), static_cast<int>(r))) continue;
      const std::int64_t ox = std::min(x1, (c + 1) * s) - std::max(x0, c * s);
      covered += ox * oy;
    }
  }
  return static_cast<double>(covered) /
         (static_cast<double>(coord.size) * static_cast<double>(coord.size));
}

std::vector<PatchCoordinate> grid_patches(const SlidePyramid& pyramid, double target_mpp,
                                          int patch_size, const BinaryMask& mask,
                                          double min_tissue_fraction) {
  require(patch_size > 0, ErrorCode::kInvalidInput, "patch size must be positive");
  const std::optional<int> level_index = pyramid.level_for_mpp(target_mpp);
  require(level_index.has_value(), ErrorCode::kInvalidInput,
          "no pyramid level at " + std::to_string(target_mpp) + " um/px");
  const Level& level = pyramid.level(*level_index);
  require(mask.level == *level_index && mask.level_width == level.width &&
              mask.level_height == level.height,
          ErrorCode::kInvalidInput, "tissue mask was computed for a different level");

  std::vector<PatchCoordinate> out;
  const int cols = ceil_div(level.width, patch_size);
  const int rows = ceil_div(level.height, patch_size);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      PatchCoordinate coord{*level_index, static_cast<std::int64_t>(c) * patch_size,
                            static_cast<std::int64_t>(r) * patch_size, patch_size};
      if (tissue_fraction(mask, coord) >= min_tissue_fraction) out.push_back(coord);
    }
  }
  return out;
}

}  // namespace rccpath
