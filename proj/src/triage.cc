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

#include "rccpath/triage.h"

#include <algorithm>
#include <cstring>

#include "json.hpp"
#include "rccpath/error.h"
#include "rccpath/stats.h"

namespace rccpath {

void TriageConfig::validate() const {
  require(0.0 <= low && low < decision_threshold && decision_threshold < high && high <= 1.0,
          ErrorCode::kInvalidInput, "triage thresholds must satisfy 0 <= low < threshold < high <= 1");
  require(magnification_factor >= 2 && (magnification_factor & (magnification_factor - 1)) == 0,
          ErrorCode::kInvalidInput, "magnification_factor must be a power of two >= 2");
  const int enabled = int{use_rotation_flip} + int{use_magnification} + int{use_neighbor};
  require(enabled >= 2, ErrorCode::kInvalidInput, "at least two triage strategies must be enabled");
}

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kBase: return "base";
    case Provenance::kRotationFlip: return "rotation_flip";
    case Provenance::kMagnification: return "magnification";
    case Provenance::kNeighbor: return "neighbor";
    case Provenance::kVote: return "vote";
  }
  return "unknown";
}

Provenance parse_provenance(std::string_view name) {
  for (Provenance p : {Provenance::kBase, Provenance::kRotationFlip, Provenance::kMagnification,
                       Provenance::kNeighbor, Provenance::kVote}) {
    if (provenance_name(p) == name) return p;
  }
  fail(ErrorCode::kInvalidInput, "unknown provenance '" + std::string(name) + "'");
}

bool needs_secondary(double p_tumor, const TriageConfig& cfg) {
  return cfg.low < p_tumor && p_tumor < cfg.high;
}

RgbImage apply_dihedral(const RgbImage& image, DihedralOp op) {
  require(image.width == image.height, ErrorCode::kInvalidInput, "dihedral variants need a square patch");
  const int n = image.width;
  RgbImage out(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      int sr = r, sc = c;
      switch (op) {
        case DihedralOp::kIdentity: break;
        case DihedralOp::kRotate90: sr = n - 1 - c; sc = r; break;
        case DihedralOp::kRotate180: sr = n - 1 - r; sc = n - 1 - c; break;
        case DihedralOp::kRotate270: sr = c; sc = n - 1 - r; break;
        case DihedralOp::kFlipHorizontal: sc = n - 1 - c; break;
        case DihedralOp::kFlipVertical: sr = n - 1 - r; break;
        case DihedralOp::kTranspose: sr = c; sc = r; break;
        case DihedralOp::kAntiTranspose: sr = n - 1 - c; sc = n - 1 - r; break;
      }
      std::memcpy(out.at(c, r), image.at(sc, sr), 3);
    }
  }
  return out;
}

std::array<Patch, 8> dihedral_variants(const Patch& patch) {
  require(patch.width() == patch.height(), ErrorCode::kInvalidInput, "dihedral variants need a square patch");
  std::array<Patch, 8> out;
  for (int i = 0; i < 8; ++i) {
    out[static_cast<std::size_t>(i)].origin = patch.origin;
    out[static_cast<std::size_t>(i)].mpp = patch.mpp;
    out[static_cast<std::size_t>(i)].partial = patch.partial;
    out[static_cast<std::size_t>(i)].image = apply_dihedral(patch.image, static_cast<DihedralOp>(i));
  }
  return out;
}

Patch resize_for_classifier(const Patch& patch, const Classifier& classifier) {
  const int size = classifier.info().input_size;
  if (patch.width() == size && patch.height() == size) return patch;
  Patch out;
  out.origin = patch.origin;
  out.partial = patch.partial;
  out.mpp = patch.mpp * static_cast<double>(patch.width()) / size;
  out.image = resize_bilinear(patch.image, size, size);
  return out;
}

Verdict rotation_flip_verdict(const Classifier& classifier, const Patch& patch, const TriageConfig& cfg) {
  const auto variants = dihedral_variants(patch);
  std::array<double, 8> p{};
  for (std::size_t i = 0; i < variants.size(); ++i) p[i] = classifier.positive_probability(variants[i]);
  const double m = median(p);
  return {m >= cfg.decision_threshold, m, Provenance::kRotationFlip};
}

PatchCoordinate magnified_coordinate(const PatchCoordinate& coord, int factor) {
  int steps = 0;
  while ((1 << steps) < factor) ++steps;
  PatchCoordinate out = coord;
  out.level = coord.level - steps;
  out.x = coord.x * factor + static_cast<std::int64_t>(coord.size) * (factor - 1) / 2;
  out.y = coord.y * factor + static_cast<std::int64_t>(coord.size) * (factor - 1) / 2;
  return out;
}

Verdict magnification_verdict(const MagnificationHandles& handles, const SlidePyramid& pyramid,
                              const PatchCoordinate& coord, const TriageConfig& cfg,
                              const PatchPreparer& prepare) {
  require(handles.base != nullptr, ErrorCode::kInvalidInput, "magnification strategy needs a classifier");
  const PatchCoordinate finer = magnified_coordinate(coord, cfg.magnification_factor);
  if (!pyramid.has_level(finer.level)) {
    fail(ErrorCode::kStrategyUnavailable,
         "no level " + std::to_string(cfg.magnification_factor) + "x finer than level " +
             std::to_string(coord.level));
  }
  const Classifier& classifier = handles.magnified ? *handles.magnified : *handles.base;
  const Patch patch = prepare(read_region(pyramid, finer), classifier);
  const double p = classifier.positive_probability(patch);
  return {p >= cfg.decision_threshold, p, Provenance::kMagnification};
}

std::array<PatchCoordinate, 4> neighbor_coordinates(const PatchCoordinate& coord) {
  const std::int64_t half = coord.size / 2;
  std::array<PatchCoordinate, 4> out;
  const std::int64_t dx[4] = {-half, half, -half, half};
  const std::int64_t dy[4] = {-half, -half, half, half};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {coord.level, coord.x + dx[i], coord.y + dy[i], coord.size};
  }
  return out;
}

Verdict neighbor_verdict(const Classifier& classifier, const SlidePyramid& pyramid,
                         const PatchCoordinate& coord, const TriageConfig& cfg,
                         const PatchPreparer& prepare) {
  const Level& level = pyramid.level(coord.level);
  const std::int64_t cx = coord.x + coord.size / 2;
  const std::int64_t cy = coord.y + coord.size / 2;
  require(cx >= 0 && cx < level.width && cy >= 0 && cy < level.height, ErrorCode::kInvalidInput,
          "patch center lies outside the level");
  double sum = 0.0;
  for (const PatchCoordinate& n : neighbor_coordinates(coord)) {
    sum += classifier.positive_probability(prepare(read_region(pyramid, n), classifier));
  }
  const double mean = sum / TriageConfig::kNeighborCount;
  return {mean >= cfg.decision_threshold, mean, Provenance::kNeighbor};
}

Verdict majority_vote(const std::optional<Verdict>& v1, const std::optional<Verdict>& v2,
                      const std::optional<Verdict>& v3) {
  // Canonical order by strategy strength makes the result independent of
  // argument order, including the floating-point mean.
  std::vector<Verdict> valid;
  for (const auto* v : {&v1, &v2, &v3}) {
    if (*v) valid.push_back(**v);
  }
  if (valid.size() < 2) {
    fail(ErrorCode::kTriageFailed, std::to_string(valid.size()) + " valid verdicts, need at least 2");
  }
  std::sort(valid.begin(), valid.end(), [](const Verdict& a, const Verdict& b) {
    if (a.provenance != b.provenance) return a.provenance < b.provenance;
    if (a.is_tumor != b.is_tumor) return a.is_tumor < b.is_tumor;
    return a.probability < b.probability;
  });

  int tumor_votes = 0;
  double sum = 0.0;
  for (const Verdict& v : valid) {
    tumor_votes += v.is_tumor ? 1 : 0;
    sum += v.probability;
  }
  const int n = static_cast<int>(valid.size());
  bool is_tumor = false;
  if (2 * tumor_votes > n) {
    is_tumor = true;
  } else if (2 * tumor_votes < n) {
    is_tumor = false;
  } else {
    is_tumor = valid.front().is_tumor;  // strongest available strategy
  }
  return {is_tumor, sum / n, Provenance::kVote};
}

TriageOutcome triage_patch(const TriageContext& ctx, const PatchCoordinate& coord, const Patch& prepared,
                           double base_probability) {
  TriageOutcome outcome;
  const TriageConfig& cfg = ctx.cfg;
  if (!needs_secondary(base_probability, cfg)) {
    outcome.final_verdict = {base_probability >= cfg.decision_threshold, base_probability, Provenance::kBase};
    return outcome;
  }
  require(ctx.pyramid != nullptr && ctx.handles.base != nullptr, ErrorCode::kInvalidInput,
          "triage context is incomplete");
  outcome.triaged = true;
  if (cfg.use_rotation_flip) {
    outcome.rotation_flip = rotation_flip_verdict(*ctx.handles.base, prepared, cfg);
  }
  if (cfg.use_magnification) {
    try {
      outcome.magnification = magnification_verdict(ctx.handles, *ctx.pyramid, coord, cfg, ctx.prepare);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kStrategyUnavailable) throw;
      outcome.unavailable.push_back("magnification: " + e.detail());
    }
  }
  if (cfg.use_neighbor) {
    outcome.neighbor = neighbor_verdict(*ctx.handles.base, *ctx.pyramid, coord, cfg, ctx.prepare);
  }
  outcome.final_verdict = majority_vote(outcome.rotation_flip, outcome.magnification, outcome.neighbor);
  return outcome;
}

std::string triage_audit_json(const PatchCoordinate& coord, double base_probability,
                              const TriageOutcome& outcome) {
  using nlohmann::json;
  auto verdict_json = [](const std::optional<Verdict>& v) -> json {
    if (!v) return nullptr;
    return {{"is_tumor", v->is_tumor}, {"probability", v->probability}};
  };
  json j;
  j["coord"] = {{"level", coord.level}, {"x", coord.x}, {"y", coord.y}, {"size", coord.size}};
  j["base_probability"] = base_probability;
  j["strategies"] = {{"rotation_flip", verdict_json(outcome.rotation_flip)},
                     {"magnification", verdict_json(outcome.magnification)},
                     {"neighbor", verdict_json(outcome.neighbor)}};
  j["unavailable"] = outcome.unavailable;
  j["final"] = {{"is_tumor", outcome.final_verdict.is_tumor},
                {"probability", outcome.final_verdict.probability},
                {"provenance", provenance_name(outcome.final_verdict.provenance)}};
  return j.dump();
}

}  // namespace rccpath
