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

// Slide-level diagnosis: tumor detection over a patch grid, area metrics,
// subtype proportions, hierarchical grading, and annotator agreement.
//
// Per-patch work fans out over a worker pool; every aggregate is built from
// accumulators whose merge is exact, so results do not depend on the number
// of workers or the order patches finish in.

#ifndef RCCPATH_DIAGNOSIS_H_
#define RCCPATH_DIAGNOSIS_H_

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rccpath/error.h"
#include "rccpath/exact_sum.h"
#include "rccpath/inference.h"
#include "rccpath/slide_store.h"
#include "rccpath/stain_norm.h"
#include "rccpath/triage.h"

namespace rccpath {

inline constexpr double kDefaultG4Threshold = 0.5;
inline constexpr double kDefaultG4Override = 0.05;
inline constexpr double kDefaultMinTumorOverlap = 0.5;

/// Stain normalization (when the classifier asks for it) followed by
/// resampling to the classifier input size.
class PatchPreparation {
 public:
  PatchPreparation() = default;
  explicit PatchPreparation(const std::optional<StainProfile>& reference, MacenkoParams params = {})
      : reference_(reference), params_(params) {}

  Patch operator()(const Patch& patch, const Classifier& classifier) const {
    return prepare(patch, classifier, nullptr);
  }
  /// Sets *stain_pass_through when normalization was requested but skipped.
  Patch prepare(const Patch& patch, const Classifier& classifier, bool* stain_pass_through) const;

  /// Throws InvalidInput if the classifier wants Macenko input and no
  /// reference profile is configured.
  void check_compatible(const Classifier& classifier) const;

 private:
  std::optional<StainProfile> reference_;
  MacenkoParams params_;
};

struct TumorRecord {
  PatchCoordinate coord;
  double p_tumor = 0.0;
  bool is_tumor = false;
  bool triaged = false;
  Provenance provenance = Provenance::kBase;
  bool stain_pass_through = false;
  std::optional<TriageOutcome> triage;
};

struct TumorMap {
  int level = 0;
  int patch_size = 0;
  double mpp = 0.0;
  std::vector<TumorRecord> records;

  std::size_t tumor_count() const;
  std::size_t triaged_count() const;
  double trigger_rate() const;
};

struct DetectionContext {
  ClassifierHandle tumor;
  /// Optional classifier for the magnification strategy.
  ClassifierHandle magnified;
  PatchPreparation preparation;
  TriageConfig triage;
  int workers = 1;
};

/// Classifies every grid patch and runs triage on band-interior ones.
/// An empty grid is EmptySlide.
TumorMap detect_tumor(const SlidePyramid& pyramid, std::span<const PatchCoordinate> grid,
                      const DetectionContext& ctx);

struct SlideMetrics {
  double tissue_area_mm2 = 0.0;
  double tumor_area_mm2 = 0.0;
  double tumor_fraction = 0.0;
  std::size_t tissue_patch_count = 0;
  std::size_t tumor_patch_count = 0;
  double patch_area_mm2 = 0.0;

  friend bool operator==(const SlideMetrics&, const SlideMetrics&) = default;
};

/// Physical area of one square patch in mm^2.
double patch_area_mm2(int patch_size, double mpp);

/// Areas from patch counts. A mask, when given, must belong to the map's
/// level. Zero tissue yields all-zero metrics.
SlideMetrics slide_metrics(const TumorMap& map, double mpp, int patch_size,
                           const BinaryMask* mask = nullptr);

/// Grid at `level` over the detected tumor region: a patch is kept when at
/// least min_overlap of its area is covered by tumor detection patches.
std::vector<PatchCoordinate> tumor_region_grid(const SlidePyramid& pyramid, const TumorMap& map,
                                               int level, int patch_size,
                                               double min_overlap = kDefaultMinTumorOverlap);

struct RegionTaskContext {
  int level = 0;
  int patch_size = 1000;
  double min_tumor_overlap = kDefaultMinTumorOverlap;
  PatchPreparation preparation;
  int workers = 1;
};

// ---- subtypes ---------------------------------------------------------------

struct SubtypeRecord {
  PatchCoordinate coord;
  std::vector<double> probs;
  std::size_t label = 0;
};

struct SubtypeLabelStats {
  std::string label;
  std::size_t patch_count = 0;
  double proportion = 0.0;
  double area_mm2 = 0.0;
  /// Mean winning probability over patches assigned this label.
  double mean_probability = 0.0;

  friend bool operator==(const SubtypeLabelStats&, const SubtypeLabelStats&) = default;
};

struct SubtypeSummary {
  std::vector<SubtypeLabelStats> per_label;
  std::size_t tumor_patch_count = 0;
  std::size_t slide_label = 0;
  double slide_confidence = 0.0;
  double patch_area_mm2 = 0.0;

  const std::string& slide_label_name() const { return per_label.at(slide_label).label; }
  friend bool operator==(const SubtypeSummary&, const SubtypeSummary&) = default;
};

class SubtypeAccumulator {
 public:
  explicit SubtypeAccumulator(std::size_t arity = 3) : counts_(arity, 0), prob_sums_(arity) {}
  void add(const SubtypeRecord& record);
  void merge(const SubtypeAccumulator& other);
  /// Plurality label; ties go to the higher mean winning probability, then
  /// to the lower index. Empty input is NoTumorDetected.
  SubtypeSummary finish(double patch_area_mm2) const;

 private:
  std::vector<std::size_t> counts_;
  std::vector<ExactSum> prob_sums_;
};

SubtypeSummary aggregate_subtypes(std::span<const SubtypeRecord> records, double patch_area_mm2);

std::vector<SubtypeRecord> predict_subtypes(const SlidePyramid& pyramid,
                                            std::span<const PatchCoordinate> coords,
                                            const Classifier& classifier,
                                            const RegionTaskContext& ctx);

/// Re-grids the tumor region at the subtype patch size and aggregates argmax
/// labels. Throws NoTumorDetected when the region yields no patches.
SubtypeSummary classify_subtypes(const SlidePyramid& pyramid, const TumorMap& map,
                                 const Classifier& subtype_classifier, const RegionTaskContext& ctx,
                                 std::vector<SubtypeRecord>* records_out = nullptr);

// ---- grades -----------------------------------------------------------------

struct GradeRecord {
  PatchCoordinate coord;
  double p_g4 = 0.0;
  bool is_g4 = false;
  /// Retained G1/G2/G3 probabilities for non-G4 patches.
  std::optional<std::array<double, 3>> g123;
};

struct GradeSummary {
  std::size_t patch_count = 0;
  std::size_t g4_count = 0;
  double g4_fraction = 0.0;
  std::array<double, 3> mean_probs_g123{0.0, 0.0, 0.0};
  std::array<double, 4> grade_percentages{0.0, 0.0, 0.0, 0.0};
  int slide_grade = 1;

  friend bool operator==(const GradeSummary&, const GradeSummary&) = default;
};

class GradeAccumulator {
 public:
  void add(const GradeRecord& record);
  void merge(const GradeAccumulator& other);
  /// Empty input is InvalidInput.
  GradeSummary finish(double g4_override = kDefaultG4Override) const;

 private:
  std::size_t count_ = 0;
  std::size_t g4_count_ = 0;
  std::array<ExactSum, 3> sums_{};
};

/// Whole-region grade: G4 when the G4 patch fraction reaches g4_override,
/// otherwise the argmax of the mean retained G1-G3 probabilities.
GradeSummary aggregate_grade(std::span<const GradeRecord> records,
                             double g4_override = kDefaultG4Override);

/// Two-stage grading of one prepared patch.
GradeRecord grade_patch(const Classifier& g4_classifier, const Classifier& g123_classifier,
                        const Patch& g4_input, const Patch& g123_input,
                        double g4_threshold = kDefaultG4Threshold);

std::vector<GradeRecord> grade_patches(const SlidePyramid& pyramid,
                                       std::span<const PatchCoordinate> coords,
                                       const Classifier& g4_classifier,
                                       const Classifier& g123_classifier,
                                       const RegionTaskContext& ctx,
                                       double g4_threshold = kDefaultG4Threshold);

/// Re-grids the tumor region like classify_subtypes. Throws NoTumorDetected
/// when the region yields no patches.
std::vector<GradeRecord> grade_patches(const SlidePyramid& pyramid, const TumorMap& map,
                                       const Classifier& g4_classifier,
                                       const Classifier& g123_classifier,
                                       const RegionTaskContext& ctx,
                                       double g4_threshold = kDefaultG4Threshold);

// ---- agreement --------------------------------------------------------------

/// Cohen's kappa between two raters. Complete agreement on a single
/// category is defined as 1. Length mismatch or empty input is InvalidInput.
template <typename Label>
double cohens_kappa(std::span<const Label> a, std::span<const Label> b) {
  require(a.size() == b.size(), ErrorCode::kInvalidInput, "rater sequences differ in length");
  require(!a.empty(), ErrorCode::kInvalidInput, "kappa needs at least one item");
  const double n = static_cast<double>(a.size());
  std::map<Label, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
    if (a[i] == b[i]) ++agree;
  }
  const double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (const auto& [label, counts] : marginals) {
    p_e += (static_cast<double>(counts.first) / n) * (static_cast<double>(counts.second) / n);
  }
  if (p_e >= 1.0) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

template <typename Label>
double cohens_kappa(const std::vector<Label>& a, const std::vector<Label>& b) {
  return cohens_kappa<Label>(std::span<const Label>(a), std::span<const Label>(b));
}

}  // namespace rccpath

#endif  // RCCPATH_DIAGNOSIS_H_
