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

#include "rccpath/stain_norm.h"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"
#include "rccpath/stats.h"

namespace rccpath {
namespace {

constexpr double kUnitTolerance = 1e-6;

double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }

// Pseudo-inverse and column norms of a two-column basis, shared by every
// pixel of an unmixing pass.
struct Unmixer {
  StainMatrix basis;
  Eigen::Matrix<double, 2, 3> pinv;
  Eigen::Vector2d col_norm2;
  bool full_rank = true;

  explicit Unmixer(const StainMatrix& m) : basis(m) {
    const Eigen::Matrix2d gram = m.transpose() * m;
    const double det = gram.determinant();
    full_rank = std::abs(det) > 1e-12;
    if (full_rank) pinv = gram.inverse() * m.transpose();
    col_norm2 = gram.diagonal();
  }

  Eigen::Vector2d solve(const Eigen::Vector3d& y) const {
    if (full_rank) {
      const Eigen::Vector2d c = pinv * y;
      if (c[0] >= 0.0 && c[1] >= 0.0) return c;
    }
    // One stain active: best of the two single-column fits, or zero.
    Eigen::Vector2d best = Eigen::Vector2d::Zero();
    double best_residual = y.squaredNorm();
    for (int k = 0; k < 2; ++k) {
      if (col_norm2[k] <= 0.0) continue;
      const double ck = basis.col(k).dot(y) / col_norm2[k];
      if (ck <= 0.0) continue;
      const double residual = (y - ck * basis.col(k)).squaredNorm();
      if (residual < best_residual) {
        best_residual = residual;
        best = Eigen::Vector2d::Zero();
        best[k] = ck;
      }
    }
    return best;
  }
};

Eigen::Vector3d pixel_od(const std::uint8_t* px, double io) {
  return {optical_density(px[0], io), optical_density(px[1], io), optical_density(px[2], io)};
}

}  // namespace

double optical_density(double intensity, double io) {
  return -std::log10((intensity + 1.0) / (io + 1.0));
}

std::uint8_t intensity_from_od(double od, double io) {
  const double v = (io + 1.0) * std::pow(10.0, -od) - 1.0;
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

std::vector<double> rgb_to_od(std::span<const std::uint8_t> pixels, double io) {
  require(io > 0.0, ErrorCode::kInvalidInput, "reference intensity must be positive");
  std::array<double, 256> table{};
  for (int v = 0; v < 256; ++v) table[v] = optical_density(v, io);
  std::vector<double> od(pixels.size());
  std::transform(pixels.begin(), pixels.end(), od.begin(), [&](std::uint8_t v) { return table[v]; });
  return od;
}

std::vector<std::uint8_t> od_to_rgb(std::span<const double> od, double io) {
  std::vector<std::uint8_t> out(od.size());
  std::transform(od.begin(), od.end(), out.begin(), [&](double d) { return intensity_from_od(d, io); });
  return out;
}

Eigen::Vector2d unmix_nonnegative(const StainMatrix& basis, const Eigen::Vector3d& od) {
  return Unmixer(basis).solve(od);
}

double angular_distance_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double denom = a.norm() * b.norm();
  if (denom == 0.0) return 180.0;
  // atan2 form stays accurate for nearly parallel vectors.
  return rad_to_deg(std::atan2(a.cross(b).norm(), a.dot(b)));
}

StainProfile estimate_stain_profile(const RgbImage& image, const MacenkoParams& params) {
  require(!image.empty(), ErrorCode::kInvalidInput, "stain estimation on empty image");
  require(params.alpha >= 0.0 && params.alpha < 50.0, ErrorCode::kInvalidInput,
          "alpha must lie in [0, 50)");
  const double io = 255.0;
  const std::size_t n = image.pixel_count();

  std::vector<Eigen::Vector3d> stained;
  stained.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d od = pixel_od(image.pixels.data() + 3 * i, io);
    if (od.mean() > params.beta) stained.push_back(od);
  }
  if (stained.size() < params.min_stained_pixels) {
    fail(ErrorCode::kInsufficientTissue,
         std::to_string(stained.size()) + " stained pixels, need " +
             std::to_string(params.min_stained_pixels));
  }

  // Principal plane of the OD cloud through the origin (second-moment matrix
  // of the 3 x N OD matrix).
  Eigen::Matrix3d moment = Eigen::Matrix3d::Zero();
  for (const auto& od : stained) moment.noalias() += od * od.transpose();
  moment /= static_cast<double>(stained.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(moment);
  const Eigen::Vector3d evals = eig.eigenvalues();
  Eigen::Vector3d v1 = eig.eigenvectors().col(2);
  Eigen::Vector3d v2 = eig.eigenvectors().col(1);
  if (!(evals[2] > 0.0) || evals[1] <= 1e-9 * evals[2]) {
    fail(ErrorCode::kDegenerateStain, "optical-density cloud has rank < 2");
  }
  if (v1.sum() < 0.0) v1 = -v1;
  if (v2.sum() < 0.0) v2 = -v2;

  std::vector<double> angles(stained.size());
  for (std::size_t i = 0; i < stained.size(); ++i) {
    angles[i] = std::atan2(stained[i].dot(v2), stained[i].dot(v1));
  }
  const double phi_min = percentile(angles, params.alpha);
  const double phi_max = percentile(std::move(angles), 100.0 - params.alpha);
  if (rad_to_deg(phi_max - phi_min) < params.min_stain_separation_deg) {
    fail(ErrorCode::kDegenerateStain, "stain directions are not separable");
  }

  auto extreme = [&](double phi) {
    Eigen::Vector3d v = std::cos(phi) * v1 + std::sin(phi) * v2;
    v = v.cwiseMax(0.0);
    const double norm = v.norm();
    if (norm == 0.0) fail(ErrorCode::kDegenerateStain, "stain direction vanished after sign correction");
    return Eigen::Vector3d(v / norm);
  };
  Eigen::Vector3d a = extreme(phi_min);
  Eigen::Vector3d b = extreme(phi_max);
  // Hematoxylin absorbs more in the blue channel than eosin.
  if (b[2] > a[2]) std::swap(a, b);

  StainProfile profile;
  profile.io = io;
  profile.stain_matrix.col(0) = a;
  profile.stain_matrix.col(1) = b;

  const Unmixer unmixer(profile.stain_matrix);
  if (!unmixer.full_rank) fail(ErrorCode::kDegenerateStain, "stain basis is singular");
  std::vector<double> conc_h(n), conc_e(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d c = unmixer.solve(pixel_od(image.pixels.data() + 3 * i, io));
    conc_h[i] = c[0];
    conc_e[i] = c[1];
  }
  profile.max_concentrations[0] = percentile(std::move(conc_h), params.concentration_percentile);
  profile.max_concentrations[1] = percentile(std::move(conc_e), params.concentration_percentile);
  if (!(profile.max_concentrations[0] > 0.0) || !(profile.max_concentrations[1] > 0.0)) {
    fail(ErrorCode::kDegenerateStain, "a stain has no robust concentration");
  }
  return profile;
}

NormalizationResult normalize_patch(const Patch& patch, const StainProfile& reference,
                                    const MacenkoParams& params) {
  NormalizationResult result;
  StainProfile source;
  try {
    source = estimate_stain_profile(patch.image, params);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInsufficientTissue && e.code() != ErrorCode::kDegenerateStain) throw;
    result.patch = patch;
    result.pass_through = true;
    result.reason = e.code();
    return result;
  }

  const Unmixer unmixer(source.stain_matrix);
  const Eigen::Vector2d scale(reference.max_concentrations[0] / source.max_concentrations[0],
                              reference.max_concentrations[1] / source.max_concentrations[1]);
  std::array<double, 256> table{};
  for (int v = 0; v < 256; ++v) table[v] = optical_density(v, source.io);

  result.patch = patch;
  std::uint8_t* px = result.patch.image.pixels.data();
  const std::size_t n = patch.image.pixel_count();
  for (std::size_t i = 0; i < n; ++i, px += 3) {
    const Eigen::Vector3d od(table[px[0]], table[px[1]], table[px[2]]);
    const Eigen::Vector2d c = unmixer.solve(od).cwiseProduct(scale);
    const Eigen::Vector3d out = reference.stain_matrix * c;
    for (int ch = 0; ch < 3; ++ch) px[ch] = intensity_from_od(out[ch], reference.io);
  }
  return result;
}

void validate_stain_profile(const StainProfile& profile) {
  for (int k = 0; k < 2; ++k) {
    const Eigen::Vector3d col = profile.stain_matrix.col(k);
    require(std::abs(col.norm() - 1.0) <= kUnitTolerance, ErrorCode::kInvalidInput,
            "stain column " + std::to_string(k) + " is not unit length");
    require(col.minCoeff() >= 0.0, ErrorCode::kInvalidInput,
            "stain column " + std::to_string(k) + " has a negative entry");
    require(profile.max_concentrations[static_cast<std::size_t>(k)] > 0.0, ErrorCode::kInvalidInput,
            "max concentrations must be positive");
  }
  require(profile.stain_matrix(2, 0) >= profile.stain_matrix(2, 1), ErrorCode::kInvalidInput,
          "hematoxylin column must carry the larger blue OD component");
  require(profile.io > 0.0, ErrorCode::kInvalidInput, "io must be positive");
}

std::string stain_profile_to_json(const StainProfile& profile) {
  nlohmann::json data = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 2; ++c) data.push_back(profile.stain_matrix(r, c));
  }
  nlohmann::json j;
  j["stain_matrix"] = {{"shape", {3, 2}}, {"data", data}};
  j["max_concentrations"] = {profile.max_concentrations[0], profile.max_concentrations[1]};
  j["io"] = profile.io;
  return j.dump(2) + "\n";
}

StainProfile stain_profile_from_json(const std::string& text) {
  StainProfile profile;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& sm = j.at("stain_matrix");
    const auto shape = sm.at("shape").get<std::vector<int>>();
    require(shape == std::vector<int>{3, 2}, ErrorCode::kInvalidInput, "stain_matrix shape must be [3, 2]");
    const auto data = sm.at("data").get<std::vector<double>>();
    require(data.size() == 6, ErrorCode::kInvalidInput, "stain_matrix needs 6 entries");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 2; ++c) profile.stain_matrix(r, c) = data[static_cast<std::size_t>(r * 2 + c)];
    }
    const auto mc = j.at("max_concentrations").get<std::vector<double>>();
    require(mc.size() == 2, ErrorCode::kInvalidInput, "max_concentrations needs 2 entries");
    profile.max_concentrations = {mc[0], mc[1]};
    profile.io = j.value("io", 255.0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("bad stain profile: ") + e.what());
  }
  validate_stain_profile(profile);
  return profile;
}

}  // namespace rccpath
