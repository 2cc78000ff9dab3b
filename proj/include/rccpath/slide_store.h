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

// Multi-resolution tiled slide storage.
//
// A slide is held as a pyramid of levels; level 0 is the scanned resolution
// and every following level halves both dimensions (rounding up) with a 2x2
// box filter. Each level is cut into a dense grid of square RGB tiles, with
// edge tiles zero-padded to the full tile size. Pyramids never change after
// ingestion, so concurrent readers need no locking.

#ifndef RCCPATH_SLIDE_STORE_H_
#define RCCPATH_SLIDE_STORE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rccpath/image.h"

namespace rccpath {

inline constexpr int kDefaultTileSize = 512;
inline constexpr double kDefaultTissueOdThreshold = 0.15;
inline constexpr int kDefaultMaskStride = 64;
inline constexpr double kDefaultMinTissueFraction = 0.5;

/// Reference labels attached to a slide by its case manifest.
struct GroundTruth {
  std::optional<std::string> subtype;
  std::optional<int> isup_grade;

  bool empty() const { return !subtype && !isup_grade; }
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Level {
  int index = 0;
  int width = 0;
  int height = 0;
  int tile_size = 0;
  int tile_cols = 0;
  int tile_rows = 0;
  /// Row-major tile grid; each tile holds tile_size * tile_size * 3 bytes.
  std::vector<std::vector<std::uint8_t>> tiles;

  const std::vector<std::uint8_t>& tile(int row, int col) const {
    return tiles[static_cast<std::size_t>(row) * tile_cols + col];
  }
};

struct SlideInfo {
  std::string slide_id;
  std::string case_id;
  double mpp_base = 0.25;
  double magnification_base = 40.0;
  int tile_size = kDefaultTileSize;
  GroundTruth ground_truth;
};

class SlidePyramid {
 public:
  /// Validates the level invariants; throws InvalidInput on violation.
  SlidePyramid(SlideInfo info, std::vector<Level> levels);

  const SlideInfo& info() const { return info_; }
  const std::string& slide_id() const { return info_.slide_id; }
  const std::string& case_id() const { return info_.case_id; }
  int tile_size() const { return info_.tile_size; }
  double mpp_base() const { return info_.mpp_base; }

  int level_count() const { return static_cast<int>(levels_.size()); }
  bool has_level(int index) const { return index >= 0 && index < level_count(); }
  /// Throws InvalidInput for a missing level.
  const Level& level(int index) const;
  const std::vector<Level>& levels() const { return levels_; }

  double mpp_at(int level) const;
  double magnification_at(int level) const;
  /// Level whose effective resolution equals target_mpp (relative 1e-6).
  std::optional<int> level_for_mpp(double target_mpp) const;
  std::optional<int> level_for_magnification(double magnification) const;

 private:
  SlideInfo info_;
  std::vector<Level> levels_;
};

struct IngestOptions {
  std::string slide_id = "slide";
  std::string case_id = "case";
  double mpp_base = 0.25;
  double magnification_base = 40.0;
  int tile_size = kDefaultTileSize;
  GroundTruth ground_truth;
};

/// One 2x2 box-average step. Output dims are ceil(w/2) x ceil(h/2); blocks
/// clipped by an odd edge average only their in-bounds pixels. Rounds half up.
RgbImage downsample_2x(const RgbImage& image);

/// Builds the full pyramid, halving until the larger dimension fits one tile.
SlidePyramid ingest_base_image(const RgbImage& image, const IngestOptions& options);

/// Assembles a size x size read from tiles. Area outside the level is zero
/// and marks the patch partial.
Patch read_region(const SlidePyramid& pyramid, const PatchCoordinate& coord);

/// Whole level as one flat raster.
RgbImage read_level(const SlidePyramid& pyramid, int level);

/// Tissue mask on a regular stride x stride cell grid over one level.
struct BinaryMask {
  int level = 0;
  int stride = kDefaultMaskStride;
  int level_width = 0;
  int level_height = 0;
  int cols = 0;
  int rows = 0;
  std::vector<std::uint8_t> cells;

  bool at(int col, int row) const {
    return cells[static_cast<std::size_t>(row) * cols + col] != 0;
  }
  std::size_t true_count() const;
  double true_fraction() const;
};

/// Per-pixel optical density with the 256-level guard used by tissue masking.
double tissue_optical_density(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// A cell is tissue when its mean optical density reaches od_threshold.
BinaryMask tissue_mask(const SlidePyramid& pyramid, int level,
                       double od_threshold = kDefaultTissueOdThreshold,
                       int stride = kDefaultMaskStride);

/// Area-weighted tissue coverage of a patch; area outside the level counts
/// as background.
double tissue_fraction(const BinaryMask& mask, const PatchCoordinate& coord);

/// Non-overlapping row-major grid at the level matching target_mpp. Edge
/// patches extend past the level and are kept only if they meet the tissue
/// rule like any other.
std::vector<PatchCoordinate> grid_patches(const SlidePyramid& pyramid, double target_mpp,
                                          int patch_size, const BinaryMask& mask,
                                          double min_tissue_fraction = kDefaultMinTissueFraction);

}  // namespace rccpath

#endif  // RCCPATH_SLIDE_STORE_H_
