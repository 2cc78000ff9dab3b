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

// Optical-density transforms and Macenko stain normalization.

#ifndef RCCPATH_STAIN_NORM_H_
#define RCCPATH_STAIN_NORM_H_

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rccpath/error.h"
#include "rccpath/image.h"

namespace rccpath {

using StainMatrix = Eigen::Matrix<double, 3, 2>;

/// Stain basis of one image. Column 0 is hematoxylin, column 1 eosin; each
/// column is a unit, non-negative optical-density direction.
struct StainProfile {
  StainMatrix stain_matrix = StainMatrix::Zero();
  /// Robust maximum (99th percentile) concentration of each stain.
  std::array<double, 2> max_concentrations{0.0, 0.0};
  double io = 255.0;
};

struct MacenkoParams {
  /// Pixels whose mean OD does not exceed beta are treated as background.
  double beta = 0.15;
  /// Angular extremes are taken at the alpha-th and (100 - alpha)-th percentiles.
  double alpha = 1.0;
  double concentration_percentile = 99.0;
  std::size_t min_stained_pixels = 100;
  /// Extremes closer than this (degrees) mean the cloud is effectively rank 1.
  double min_stain_separation_deg = 3.0;
};

double optical_density(double intensity, double io = 255.0);
std::uint8_t intensity_from_od(double od, double io = 255.0);

/// Per-channel OD = -log10((v + 1) / (io + 1)).
std::vector<double> rgb_to_od(std::span<const std::uint8_t> pixels, double io = 255.0);
/// v = clamp(round((io + 1) * 10^-OD - 1), 0, 255).
std::vector<std::uint8_t> od_to_rgb(std::span<const double> od, double io = 255.0);

/// Exact non-negative least squares for a two-column basis.
Eigen::Vector2d unmix_nonnegative(const StainMatrix& basis, const Eigen::Vector3d& od);

/// Throws InsufficientTissue or DegenerateStain.
StainProfile estimate_stain_profile(const RgbImage& image, const MacenkoParams& params = {});
inline StainProfile estimate_stain_profile(const Patch& patch, const MacenkoParams& params = {}) {
  return estimate_stain_profile(patch.image, params);
}

struct NormalizationResult {
  Patch patch;
  bool pass_through = false;
  /// Why normalization was skipped, when pass_through is set.
  std::optional<ErrorCode> reason;
};

/// Maps the patch onto the reference stain basis and concentration scale.
/// Patches whose own profile cannot be estimated come back unchanged with
/// pass_through set.
NormalizationResult normalize_patch(const Patch& patch, const StainProfile& reference,
                                    const MacenkoParams& params = {});

/// Angle in degrees between two directions.
double angular_distance_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

std::string stain_profile_to_json(const StainProfile& profile);
/// Throws InvalidInput on schema or invariant violations.
StainProfile stain_profile_from_json(const std::string& text);

/// Checks unit columns, non-negativity, ordering, and positive scales.
void validate_stain_profile(const StainProfile& profile);

}  // namespace rccpath

#endif  // RCCPATH_STAIN_NORM_H_
