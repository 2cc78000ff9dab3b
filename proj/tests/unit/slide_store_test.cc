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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <cstring>
#include <random>

#include "json.hpp"
#include "rccpath/error.h"
#include "rccpath/image_io.h"
#include "rccpath/slide_store.h"
#include "support/test_support.h"

namespace rccpath {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using testing::fill_rect;
using testing::pyramid_from;
using testing::random_image;
using testing::solid;

RgbImage crop(const RgbImage& img, std::int64_t x0, std::int64_t y0, int size) {
  RgbImage out(size, size, 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const std::int64_t sx = x0 + x, sy = y0 + y;
      if (sx < 0 || sy < 0 || sx >= img.width || sy >= img.height) continue;
      std::memcpy(out.at(x, y), img.at(static_cast<int>(sx), static_cast<int>(sy)), 3);
    }
  }
  return out;
}

double mean_value(const RgbImage& img) {
  double s = 0;
  for (auto v : img.pixels) s += v;
  return s / static_cast<double>(img.pixels.size());
}

TEST(Ingest, ConstantGrayBuildsTwoLevels) {
  const auto pyr = pyramid_from(solid(1024, 1024, 137, 137, 137), 512);
  ASSERT_EQ(pyr.level_count(), 2);
  EXPECT_EQ(pyr.level(0).width, 1024);
  EXPECT_EQ(pyr.level(1).width, 512);
  const RgbImage l1 = read_level(pyr, 1);
  for (auto v : l1.pixels) ASSERT_EQ(v, 137);
}

TEST(Ingest, OddSizesHalveWithCeiling) {
  const auto pyr = pyramid_from(random_image(1000, 600, 1), 512);
  ASSERT_EQ(pyr.level_count(), 2);
  EXPECT_EQ(pyr.level(0).width, 1000);
  EXPECT_EQ(pyr.level(0).height, 600);
  EXPECT_EQ(pyr.level(1).width, 500);
  EXPECT_EQ(pyr.level(1).height, 300);
}

TEST(Ingest, TileGridMatchesLevelDims) {
  const auto pyr = pyramid_from(random_image(300, 130, 2), 64);
  for (const auto& l : pyr.levels()) {
    EXPECT_EQ(l.tile_cols, (l.width + 63) / 64);
    EXPECT_EQ(l.tile_rows, (l.height + 63) / 64);
    EXPECT_EQ(l.tiles.size(), static_cast<std::size_t>(l.tile_cols * l.tile_rows));
    for (const auto& t : l.tiles) EXPECT_EQ(t.size(), 64u * 64u * 3u);
  }
  EXPECT_LE(std::max(pyr.levels().back().width, pyr.levels().back().height), 64);
}

TEST(Downsample, TwoByTwoRoundsHalfUp) {
  RgbImage img(2, 2, 0);
  for (int c = 0; c < 3; ++c) img.at(1, 1)[c] = 255;
  const RgbImage out = downsample_2x(img);
  ASSERT_EQ(out.width, 1);
  ASSERT_EQ(out.height, 1);
  // (0 + 0 + 0 + 255) / 4 = 63.75 rounds to 64.
  EXPECT_EQ(out.pixels[0], 64);
  EXPECT_EQ(out.pixels[1], 64);
  EXPECT_EQ(out.pixels[2], 64);
}

TEST(Downsample, ExactHalfRoundsUp) {
  RgbImage img(2, 2, 0);
  img.at(0, 0)[0] = 1;
  img.at(1, 0)[0] = 1;
  // 2 / 4 = 0.5 rounds up to 1.
  EXPECT_EQ(downsample_2x(img).pixels[0], 1);
}

TEST(Downsample, OddEdgeAveragesInBoundsPixelsOnly) {
  RgbImage img = solid(3, 1, 10, 20, 30);
  fill_rect(img, 2, 0, 1, 1, 200, 100, 50);
  const RgbImage out = downsample_2x(img);
  ASSERT_EQ(out.width, 2);
  EXPECT_EQ(out.at(1, 0)[0], 200);
  EXPECT_EQ(out.at(1, 0)[2], 50);
}

TEST(Downsample, MeanIsConservedWithinOneGrayLevel) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const int w = 2 * static_cast<int>(rng() % 60 + 1);
    const int h = 2 * static_cast<int>(rng() % 60 + 1);
    const RgbImage img = random_image(w, h, seed);
    EXPECT_NEAR(mean_value(downsample_2x(img)), mean_value(img), 1.0) << w << "x" << h;
  }
}

TEST(Ingest, RejectsBadInput) {
  IngestOptions o;
  EXPECT_THROW(ingest_base_image(RgbImage(), o), Error);
  o.mpp_base = 0.0;
  EXPECT_THROW(ingest_base_image(solid(8, 8, 1, 1, 1), o), Error);
  o.mpp_base = 0.25;
  o.tile_size = 100;
  EXPECT_THROW(ingest_base_image(solid(8, 8, 1, 1, 1), o), Error);
  try {
    o.tile_size = 64;
    o.mpp_base = -1;
    ingest_base_image(solid(8, 8, 1, 1, 1), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidInput);
  }
}

TEST(ReadRegion, InsideOneTileEqualsSubRectangle) {
  const RgbImage img = random_image(256, 256, 3);
  const auto pyr = pyramid_from(img, 64);
  const Patch p = read_region(pyr, {0, 70, 10, 40});
  EXPECT_FALSE(p.partial);
  EXPECT_EQ(p.image, crop(img, 70, 10, 40));
  EXPECT_DOUBLE_EQ(p.mpp, 0.25);
}

TEST(ReadRegion, StraddlingFourTilesEqualsFlatCrop) {
  const RgbImage img = random_image(256, 256, 4);
  const auto pyr = pyramid_from(img, 64);
  const Patch p = read_region(pyr, {0, 40, 50, 50});
  EXPECT_EQ(p.image, crop(img, 40, 50, 50));
}

TEST(ReadRegion, BeyondEdgeIsZeroPaddedAndPartial) {
  const RgbImage img = solid(100, 100, 9, 9, 9);
  const auto pyr = pyramid_from(img, 64);
  const Patch p = read_region(pyr, {0, 80, 0, 32});
  EXPECT_TRUE(p.partial);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const std::uint8_t expected = x < 20 ? 9 : 0;
      ASSERT_EQ(p.image.at(x, y)[0], expected) << x << "," << y;
    }
  }
  const Patch neg = read_region(pyr, {0, -10, -10, 20});
  EXPECT_TRUE(neg.partial);
  EXPECT_EQ(neg.image, crop(img, -10, -10, 20));
}

TEST(ReadRegion, MissingLevelIsInvalidInput) {
  const auto pyr = pyramid_from(solid(64, 64, 0, 0, 0), 64);
  try {
    read_region(pyr, {3, 0, 0, 8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidInput);
  }
}

TEST(ReadRegion, ReconstructsAnyRectangleAtLevelZero) {
  const RgbImage img = random_image(333, 217, 5);
  const auto pyr = pyramid_from(img, 64);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const int size = static_cast<int>(rng() % 120 + 1);
    const std::int64_t x = static_cast<std::int64_t>(rng() % 400) - 40;
    const std::int64_t y = static_cast<std::int64_t>(rng() % 300) - 40;
    ASSERT_EQ(read_region(pyr, {0, x, y, size}).image, crop(img, x, y, size));
  }
}

TEST(ReadRegion, HigherLevelsMatchFlatDownsample) {
  const RgbImage img = random_image(300, 200, 7);
  const auto pyr = pyramid_from(img, 64);
  const RgbImage l1 = downsample_2x(img);
  EXPECT_EQ(read_level(pyr, 1), l1);
  EXPECT_EQ(read_region(pyr, {1, 17, 33, 45}).image, crop(l1, 17, 33, 45));
}

TEST(Pyramid, ResolutionLookup) {
  const auto pyr = pyramid_from(solid(512, 512, 0, 0, 0), 64, 0.25, 40.0);
  EXPECT_DOUBLE_EQ(pyr.mpp_at(1), 0.5);
  EXPECT_DOUBLE_EQ(pyr.magnification_at(1), 20.0);
  EXPECT_EQ(pyr.level_for_mpp(0.5), 1);
  EXPECT_EQ(pyr.level_for_magnification(10.0), 2);
  EXPECT_FALSE(pyr.level_for_mpp(0.3).has_value());
  EXPECT_FALSE(pyr.level_for_magnification(80.0).has_value());
}

TEST(TissueMask, WhiteIsBackground) {
  const auto pyr = pyramid_from(solid(256, 256, 255, 255, 255), 64);
  const BinaryMask m = tissue_mask(pyr, 0);
  EXPECT_EQ(m.cols, 4);
  EXPECT_EQ(m.rows, 4);
  EXPECT_EQ(m.true_count(), 0u);
}

TEST(TissueMask, StainedColorIsTissue) {
  auto od = [](int v) { return -std::log10((v + 1) / 256.0); };
  const double mean_od = (od(64) + od(32) + od(96)) / 3.0;
  ASSERT_GE(mean_od, 0.15);
  EXPECT_NEAR(tissue_optical_density(64, 32, 96), mean_od, 1e-12);
  const auto pyr = pyramid_from(solid(128, 128, 64, 32, 96), 64);
  EXPECT_EQ(tissue_mask(pyr, 0).true_fraction(), 1.0);
}

TEST(TissueMask, HalfStainedFraction) {
  RgbImage img = solid(256, 256, 255, 255, 255);
  fill_rect(img, 0, 0, 256, 100, 64, 32, 96);
  const auto pyr = pyramid_from(img, 64);
  const BinaryMask m = tissue_mask(pyr, 0, 0.15, 16);
  const double stained = 100.0 / 256.0;
  EXPECT_NEAR(m.true_fraction(), stained, 1.0 / m.rows);
}

TEST(TissueMask, MonotoneInThreshold) {
  const auto pyr = pyramid_from(random_image(200, 200, 8), 64);
  BinaryMask prev = tissue_mask(pyr, 0, 0.01, 8);
  for (double t = 0.05; t < 2.5; t += 0.05) {
    const BinaryMask cur = tissue_mask(pyr, 0, t, 8);
    for (std::size_t i = 0; i < cur.cells.size(); ++i) {
      ASSERT_FALSE(cur.cells[i] && !prev.cells[i]) << "threshold " << t;
    }
    prev = cur;
  }
}

TEST(TissueMask, ThresholdDomain) {
  const auto pyr = pyramid_from(solid(64, 64, 0, 0, 0), 64);
  EXPECT_THROW(tissue_mask(pyr, 0, 0.0), Error);
  EXPECT_THROW(tissue_mask(pyr, 0, 3.0), Error);
}

TEST(GridPatches, FullTissueTilesExactly) {
  const auto pyr = pyramid_from(solid(1024, 1024, 64, 32, 96), 512);
  const auto mask = tissue_mask(pyr, 0);
  const auto grid = grid_patches(pyr, 0.25, 512, mask);
  const std::vector<PatchCoordinate> expected{{0, 0, 0, 512}, {0, 512, 0, 512}, {0, 0, 512, 512}, {0, 512, 512, 512}};
  EXPECT_EQ(grid, expected);
}

TEST(GridPatches, BackgroundGivesNothing) {
  const auto pyr = pyramid_from(solid(1024, 1024, 255, 255, 255), 512);
  EXPECT_TRUE(grid_patches(pyr, 0.25, 512, tissue_mask(pyr, 0)).empty());
}

TEST(GridPatches, SingleAlignedTissueSquare) {
  RgbImage img = solid(1024, 1024, 255, 255, 255);
  fill_rect(img, 512, 0, 512, 512, 64, 32, 96);
  const auto pyr = pyramid_from(img, 512);
  const auto grid = grid_patches(pyr, 0.25, 512, tissue_mask(pyr, 0));
  ASSERT_EQ(grid.size(), 1u);
  EXPECT_EQ(grid[0], (PatchCoordinate{0, 512, 0, 512}));
}

TEST(GridPatches, NoMatchingLevel) {
  const auto pyr = pyramid_from(solid(256, 256, 64, 32, 96), 64);
  const auto mask = tissue_mask(pyr, 0);
  EXPECT_THROW(grid_patches(pyr, 0.3, 64, mask), Error);
  // Mask from another level.
  EXPECT_THROW(grid_patches(pyr, 0.5, 64, mask), Error);
}

TEST(GridPatches, SortedDisjointAndCoveringQualifiedCells) {
  RgbImage img = solid(700, 500, 255, 255, 255);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 12; ++i) {
    fill_rect(img, static_cast<int>(rng() % 650), static_cast<int>(rng() % 450), 90, 70, 80, 40, 120);
  }
  const auto pyr = pyramid_from(img, 64);
  const auto mask = tissue_mask(pyr, 0, 0.15, 16);
  const int size = 64;
  const auto grid = grid_patches(pyr, 0.25, size, mask, 0.5);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const auto& a = grid[i - 1];
    const auto& b = grid[i];
    ASSERT_TRUE(a.y < b.y || (a.y == b.y && a.x < b.x));
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const bool overlap = std::abs(grid[i].x - grid[j].x) < size && std::abs(grid[i].y - grid[j].y) < size;
      ASSERT_FALSE(overlap);
    }
  }
  // Every grid cell meeting the rule is present.
  std::size_t qualified = 0;
  for (int y = 0; y < 500; y += size) {
    for (int x = 0; x < 700; x += size) {
      if (tissue_fraction(mask, {0, x, y, size}) >= 0.5) ++qualified;
    }
  }
  EXPECT_EQ(grid.size(), qualified);
  EXPECT_GT(qualified, 0u);
}

TEST(TissueFraction, CountsOutsideAsBackground) {
  const auto pyr = pyramid_from(solid(128, 128, 64, 32, 96), 64);
  const auto mask = tissue_mask(pyr, 0, 0.15, 16);
  EXPECT_DOUBLE_EQ(tissue_fraction(mask, {0, 0, 0, 64}), 1.0);
  EXPECT_DOUBLE_EQ(tissue_fraction(mask, {0, 96, 0, 64}), 0.5);
  EXPECT_DOUBLE_EQ(tissue_fraction(mask, {0, 200, 200, 64}), 0.0);
}

TEST(PyramidIo, SaveLoadRoundTrip) {
  TempDir dir;
  RgbImage img = random_image(300, 170, 10);
  IngestOptions o;
  o.tile_size = 64;
  o.slide_id = "s1";
  o.case_id = "c1";
  o.mpp_base = 0.5;
  o.magnification_base = 20;
  o.ground_truth.subtype = "pRCC";
  o.ground_truth.isup_grade = 2;
  const auto pyr = ingest_base_image(img, o);
  save_pyramid(pyr, dir / "p");
  const auto back = load_pyramid(dir / "p");
  EXPECT_EQ(back.slide_id(), "s1");
  EXPECT_EQ(back.case_id(), "c1");
  EXPECT_DOUBLE_EQ(back.mpp_base(), 0.5);
  EXPECT_EQ(back.info().ground_truth, o.ground_truth);
  ASSERT_EQ(back.level_count(), pyr.level_count());
  for (int l = 0; l < pyr.level_count(); ++l) EXPECT_EQ(read_level(back, l), read_level(pyr, l));

  EXPECT_EQ(fs::file_size(dir / "p" / "L0" / "0_0.rgb"), 64u * 64u * 3u);
  EXPECT_EQ(fs::file_size(dir / "p" / "L0" / "2_4.rgb"), 64u * 64u * 3u);
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "p" / "manifest.json"));
  for (const char* key : {"slide_id", "case_id", "mpp_base", "magnification_base", "tile_size", "levels"}) {
    EXPECT_TRUE(manifest.contains(key)) << key;
  }
  EXPECT_EQ(manifest["levels"][1]["width"], 150);
}

TEST(PyramidIo, TruncatedTileIsRejected) {
  TempDir dir;
  save_pyramid(pyramid_from(random_image(100, 100, 11), 64), dir / "p");
  fs::resize_file(dir / "p" / "L0" / "1_1.rgb", 100);
  EXPECT_THROW(load_pyramid(dir / "p"), Error);
}

TEST(ImageIo, PngAndPpmRoundTrip) {
  TempDir dir;
  const RgbImage img = random_image(37, 21, 12);
  write_png(dir / "a.png", img);
  write_ppm(dir / "a.ppm", img);
  EXPECT_EQ(read_png(dir / "a.png"), img);
  EXPECT_EQ(read_ppm(dir / "a.ppm"), img);
  EXPECT_EQ(read_image(dir / "a.png"), img);
  EXPECT_EQ(read_image(dir / "a.ppm"), img);
  write_text_file(dir / "junk.bin", "hello");
  EXPECT_THROW(read_image(dir / "junk.bin"), Error);
}

TEST(ImageIo, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex(std::string("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace rccpath
