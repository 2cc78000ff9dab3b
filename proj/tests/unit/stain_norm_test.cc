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

#include <algorithm>
#include <cmath>
#include <Eigen/Dense>
#include <functional>
#include <numeric>
#include <random>

#include "json.hpp"
#include "rccpath/error.h"
#include "rccpath/stain_norm.h"
#include "support/test_support.h"

namespace rccpath {
namespace {

using testing::solid;
using testing::stain_mixture;
using testing::unit;

const Eigen::Vector3d kH = unit(0.650, 0.704, 0.286);
const Eigen::Vector3d kE = unit(0.072, 0.990, 0.105);

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidInput;
}

TEST(OpticalDensity, Anchors) {
  EXPECT_DOUBLE_EQ(optical_density(255), 0.0);
  EXPECT_NEAR(optical_density(24.6), 1.0, 1e-12);
  EXPECT_EQ(intensity_from_od(0.0), 255);
  // 256 * 10^-3 - 1 < 0 clamps to 0.
  EXPECT_EQ(intensity_from_od(3.0), 0);
}

TEST(OpticalDensity, RoundTripAllChannelValues) {
  std::vector<std::uint8_t> all(256 * 3);
  for (int v = 0; v < 256; ++v) {
    all[3 * v] = all[3 * v + 1] = all[3 * v + 2] = static_cast<std::uint8_t>(v);
    ASSERT_EQ(intensity_from_od(optical_density(v)), v);
  }
  const auto od = rgb_to_od(all);
  for (double d : od) ASSERT_GE(d, 0.0);
  EXPECT_EQ(od_to_rgb(od), all);
}

TEST(Unmix, MatchesExhaustiveNonNegativeOracle) {
  StainMatrix m;
  m.col(0) = kH;
  m.col(1) = kE;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.5, 2.0);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector3d od(u(rng), u(rng), u(rng));
    const Eigen::Vector2d got = unmix_nonnegative(m, od);
    ASSERT_GE(got[0], 0.0);
    ASSERT_GE(got[1], 0.0);
    // Oracle: minimum over the KKT candidates of the 2-variable problem.
    auto residual = [&](const Eigen::Vector2d& c) { return (m * c - od).squaredNorm(); };
    std::vector<Eigen::Vector2d> cands{Eigen::Vector2d::Zero()};
    const Eigen::Vector2d ls = (m.transpose() * m).ldlt().solve(m.transpose() * od);
    if (ls[0] >= 0 && ls[1] >= 0) cands.push_back(ls);
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d c = Eigen::Vector2d::Zero();
      c[k] = std::max(0.0, m.col(k).dot(od) / m.col(k).squaredNorm());
      cands.push_back(c);
    }
    double best = 1e300;
    for (const auto& c : cands) best = std::min(best, residual(c));
    ASSERT_NEAR(residual(got), best, 1e-9);
  }
}

TEST(Macenko, RecoversKnownStains) {
  const RgbImage img = stain_mixture(kH, kE, 128, 128, 2);
  const StainProfile p = estimate_stain_profile(img);
  EXPECT_LT(angular_distance_deg(p.stain_matrix.col(0), kH), 2.0);
  EXPECT_LT(angular_distance_deg(p.stain_matrix.col(1), kE), 2.0);
}

TEST(Macenko, ProfileInvariants) {
  const StainProfile p = estimate_stain_profile(stain_mixture(kH, kE, 64, 64, 3));
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(p.stain_matrix.col(c).norm(), 1.0, 1e-6);
    EXPECT_GE(p.stain_matrix.col(c).minCoeff(), 0.0);
    EXPECT_GT(p.max_concentrations[static_cast<std::size_t>(c)], 0.0);
  }
  EXPECT_GT(p.stain_matrix(2, 0), p.stain_matrix(2, 1));
  EXPECT_NO_THROW(validate_stain_profile(p));
}

TEST(Macenko, WhiteIsInsufficientTissue) {
  EXPECT_EQ(code_of([] { estimate_stain_profile(solid(64, 64, 255, 255, 255)); }),
            ErrorCode::kInsufficientTissue);
}

TEST(Macenko, SingleStainIsDegenerate) {
  RgbImage img(64, 64);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.2, 1.5);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const Eigen::Vector3d od = kH * u(rng);
    for (int c = 0; c < 3; ++c) img.pixels[3 * i + c] = intensity_from_od(od[c]);
  }
  // Quantization scatters a rank-1 cloud slightly, but never beyond the
  // minimum angular spread.
  EXPECT_EQ(code_of([&] { estimate_stain_profile(img); }), ErrorCode::kDegenerateStain);
  EXPECT_EQ(code_of([] { estimate_stain_profile(solid(64, 64, 60, 60, 60)); }), ErrorCode::kDegenerateStain);
}

TEST(Macenko, ShuffleInvariant) {
  RgbImage img = stain_mixture(kH, kE, 96, 96, 5);
  const StainProfile a = estimate_stain_profile(img);
  std::vector<std::size_t> order(img.pixel_count());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(6));
  RgbImage shuffled(img.width, img.height);
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::copy_n(img.pixels.begin() + 3 * order[i], 3, shuffled.pixels.begin() + 3 * i);
  }
  const StainProfile b = estimate_stain_profile(shuffled);
  for (int c = 0; c < 2; ++c) {
    EXPECT_LT(angular_distance_deg(a.stain_matrix.col(c), b.stain_matrix.col(c)), 0.5);
  }
}

RgbImage scaled_mixture(double scale, std::uint64_t seed) {
  RgbImage img(96, 96);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const Eigen::Vector3d od = scale * (kH * u(rng) + kE * u(rng));
    for (int c = 0; c < 3; ++c) img.pixels[3 * i + c] = intensity_from_od(od[c]);
  }
  return img;
}

TEST(Macenko, ConcentrationScaleInvariant) {
  const StainProfile a = estimate_stain_profile(scaled_mixture(1.0, 7));
  const StainProfile b = estimate_stain_profile(scaled_mixture(0.7, 7));
  for (int c = 0; c < 2; ++c) {
    EXPECT_LT(angular_distance_deg(a.stain_matrix.col(c), b.stain_matrix.col(c)), 0.5);
  }
}

TEST(Normalize, SelfNormalizationIsNearIdentity) {
  const RgbImage img = stain_mixture(kH, kE, 128, 128, 8);
  const StainProfile ref = estimate_stain_profile(img);
  Patch p;
  p.image = img;
  const NormalizationResult r = normalize_patch(p, ref);
  EXPECT_FALSE(r.pass_through);
  EXPECT_EQ(r.patch.image.width, img.width);
  EXPECT_EQ(r.patch.image.height, img.height);
  EXPECT_LE(testing::mean_abs_diff(r.patch.image, img), 3.0);
}

TEST(Normalize, DifferentStainsSameConcentrationsConverge) {
  const Eigen::Vector3d h2 = unit(0.55, 0.78, 0.30);
  const Eigen::Vector3d e2 = unit(0.12, 0.95, 0.20);
  const RgbImage a = stain_mixture(kH, kE, 128, 128, 9);
  const RgbImage b = stain_mixture(h2, e2, 128, 128, 9);
  const StainProfile ref = estimate_stain_profile(a);
  Patch pa, pb;
  pa.image = a;
  pb.image = b;
  const RgbImage na = normalize_patch(pa, ref).patch.image;
  const RgbImage nb = normalize_patch(pb, ref).patch.image;
  EXPECT_LE(testing::mean_abs_diff(na, nb), 3.0);
}

TEST(Normalize, WhitePassesThroughWithFlag) {
  const StainProfile ref = estimate_stain_profile(stain_mixture(kH, kE, 64, 64, 10));
  Patch p;
  p.image = solid(32, 32, 255, 255, 255);
  const NormalizationResult r = normalize_patch(p, ref);
  EXPECT_TRUE(r.pass_through);
  EXPECT_EQ(r.reason, ErrorCode::kInsufficientTissue);
  EXPECT_EQ(r.patch.image, p.image);
}

TEST(StainProfileJson, RoundTripAndShape) {
  const StainProfile p = estimate_stain_profile(stain_mixture(kH, kE, 64, 64, 11));
  const std::string text = stain_profile_to_json(p);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["stain_matrix"]["shape"], nlohmann::json::array({3, 2}));
  EXPECT_EQ(j["stain_matrix"]["data"].size(), 6u);
  const StainProfile back = stain_profile_from_json(text);
  EXPECT_EQ(back.stain_matrix, p.stain_matrix);
  EXPECT_EQ(back.max_concentrations, p.max_concentrations);
  EXPECT_EQ(back.io, p.io);
}

TEST(StainProfileJson, RejectsInvalidProfiles) {
  EXPECT_THROW(stain_profile_from_json("{}"), Error);
  EXPECT_THROW(stain_profile_from_json(
                   R"({"stain_matrix":{"shape":[3,2],"data":[-1,0,0,1,0,0]},"max_concentrations":[1,1],"io":255})"),
               Error);
  EXPECT_THROW(stain_profile_from_json(
                   R"({"stain_matrix":{"shape":[3,2],"data":[0.5,0,0,1,0,0]},"max_concentrations":[1,1],"io":255})"),
               Error);
  StainProfile bad;
  bad.stain_matrix.col(0) = kH;
  bad.stain_matrix.col(1) = kE;
  bad.max_concentrations = {1.0, 0.0};
  EXPECT_THROW(validate_stain_profile(bad), Error);
}

}  // namespace
}  // namespace rccpath
