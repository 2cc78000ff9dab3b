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

// Secondary validation of low-confidence tumor patches.
//
// A patch whose tumor probability falls strictly inside (low, high) is
// re-examined by up to three strategies and the verdicts are put to a vote:
//   rotation_flip  median over the eight dihedral variants of the patch
//   magnification  same-size patch at the same physical center, one
//                  magnification step finer
//   neighbor       mean over four half-offset diagonal context patches
// Patches outside the band keep the base classifier's answer.

#ifndef RCCPATH_TRIAGE_H_
#define RCCPATH_TRIAGE_H_

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rccpath/image.h"
#include "rccpath/inference.h"
#include "rccpath/slide_store.h"

namespace rccpath {

struct TriageConfig {
  double low = 0.2;
  double high = 0.8;
  double decision_threshold = 0.5;
  int magnification_factor = 2;
  static constexpr int kNeighborCount = 4;
  bool use_rotation_flip = true;
  bool use_magnification = true;
  bool use_neighbor = true;

  /// Throws InvalidInput unless 0 <= low < threshold < high <= 1, the
  /// factor is a power of two >= 2, and at least two strategies are on.
  void validate() const;
};

enum class Provenance { kBase, kRotationFlip, kMagnification, kNeighbor, kVote };
std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view name);

struct Verdict {
  bool is_tumor = false;
  /// The statistic the decision was made on.
  double probability = 0.0;
  Provenance provenance = Provenance::kBase;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// True iff low < p < high.
bool needs_secondary(double p_tumor, const TriageConfig& cfg);

/// Members of the dihedral group of the square, in the order returned by
/// dihedral_variants.
enum class DihedralOp {
  kIdentity,
  kRotate90,   // clockwise
  kRotate180,
  kRotate270,  // clockwise
  kFlipHorizontal,
  kFlipVertical,
  kTranspose,
  kAntiTranspose,
};

RgbImage apply_dihedral(const RgbImage& image, DihedralOp op);

/// The identity plus the seven other symmetries of a square patch.
std::array<Patch, 8> dihedral_variants(const Patch& patch);

/// Readies a raw pyramid read for a specific classifier (stain
/// normalization, resampling to the classifier's input size).
using PatchPreparer = std::function<Patch(const Patch&, const Classifier&)>;

/// Resampling only.
Patch resize_for_classifier(const Patch& patch, const Classifier& classifier);

/// Median of the eight dihedral predictions; tumor iff median >= threshold.
/// The patch must already be prepared for the classifier.
Verdict rotation_flip_verdict(const Classifier& classifier, const Patch& patch,
                              const TriageConfig& cfg);

struct MagnificationHandles {
  ClassifierHandle base;
  /// Optional classifier trained for the finer level; base is used if null.
  ClassifierHandle magnified;
};

/// Top-left of the equally sized patch centered on the same physical point
/// magnification_factor times finer.
PatchCoordinate magnified_coordinate(const PatchCoordinate& coord, int magnification_factor);

/// Throws StrategyUnavailable when the pyramid has no finer level.
Verdict magnification_verdict(const MagnificationHandles& handles, const SlidePyramid& pyramid,
                              const PatchCoordinate& coord, const TriageConfig& cfg,
                              const PatchPreparer& prepare = resize_for_classifier);

/// Four patches of the same size centered at (+-size/2, +-size/2) from the
/// patch center, in the order (-,-), (+,-), (-,+), (+,+).
std::array<PatchCoordinate, 4> neighbor_coordinates(const PatchCoordinate& coord);

Verdict neighbor_verdict(const Classifier& classifier, const SlidePyramid& pyramid,
                         const PatchCoordinate& coord, const TriageConfig& cfg,
                         const PatchPreparer& prepare = resize_for_classifier);

/// Majority of the available verdicts (unavailable ones are nullopt). With
/// two verdicts that disagree, the rotation_flip verdict decides, then
/// magnification, then neighbor. Order of the arguments does not matter.
/// Fewer than two verdicts is TriageFailed.
Verdict majority_vote(const std::optional<Verdict>& v1, const std::optional<Verdict>& v2,
                      const std::optional<Verdict>& v3);

struct TriageOutcome {
  Verdict final_verdict;
  bool triaged = false;
  std::optional<Verdict> rotation_flip;
  std::optional<Verdict> magnification;
  std::optional<Verdict> neighbor;
  /// Strategies that were enabled but could not run, with the reason.
  std::vector<std::string> unavailable;
};

struct TriageContext {
  const SlidePyramid* pyramid = nullptr;
  MagnificationHandles handles;
  PatchPreparer prepare = resize_for_classifier;
  TriageConfig cfg;
};

/// Runs the whole protocol for one patch given its prepared pixels and base
/// probability.
TriageOutcome triage_patch(const TriageContext& ctx, const PatchCoordinate& coord,
                           const Patch& prepared, double base_probability);

/// One JSON object (no trailing newline) for the triage audit log.
std::string triage_audit_json(const PatchCoordinate& coord, double base_probability,
                              const TriageOutcome& outcome);

}  // namespace rccpath

#endif  // RCCPATH_TRIAGE_H_
