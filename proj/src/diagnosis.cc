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

#include "rccpath/diagnosis.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "rccpath/worker_pool.h"

namespace rccpath {

Patch PatchPreparation::prepare(const Patch& patch, const Classifier& classifier,
                                bool* stain_pass_through) const {
  if (stain_pass_through) *stain_pass_through = false;
  if (classifier.info().normalization != InputNormalization::kMacenko) {
    return resize_for_classifier(patch, classifier);
  }
  check_compatible(classifier);
  NormalizationResult normalized = normalize_patch(patch, *reference_, params_);
  if (stain_pass_through) *stain_pass_through = normalized.pass_through;
  return resize_for_classifier(normalized.patch, classifier);
}

void PatchPreparation::check_compatible(const Classifier& classifier) const {
  if (classifier.info().normalization == InputNormalization::kMacenko && !reference_) {
    fail(ErrorCode::kInvalidInput, "classifier '" + classifier.info().source +
                                       "' expects Macenko-normalized input but no reference "
                                       "stain profile is configured");
  }
}

std::size_t TumorMap::tumor_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const TumorRecord& r) { return r.is_tumor; }));
}

std::size_t TumorMap::triaged_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const TumorRecord& r) { return r.triaged; }));
}

double TumorMap::trigger_rate() const {
  return records.empty() ? 0.0
                         : static_cast<double>(triaged_count()) / static_cast<double>(records.size());
}

TumorMap detect_tumor(const SlidePyramid& pyramid, std::span<const PatchCoordinate> grid,
                      const DetectionContext& ctx) {
  require(!grid.empty(), ErrorCode::kEmptySlide,
          "slide '" + pyramid.slide_id() + "' has no tissue patches to classify");
  require(ctx.tumor != nullptr, ErrorCode::kInvalidInput, "no tumor classifier");
  require(ctx.tumor->task() == Task::kTumor2, ErrorCode::kSchemaMismatch,
          "detection classifier must be a tumor2 model");
  ctx.triage.validate();
  ctx.preparation.check_compatible(*ctx.tumor);
  if (ctx.magnified) ctx.preparation.check_compatible(*ctx.magnified);

  TumorMap map;
  map.level = grid.front().level;
  map.patch_size = grid.front().size;
  map.mpp = pyramid.mpp_at(map.level);
  for (const auto& c : grid) {
    require(c.level == map.level && c.size == map.patch_size, ErrorCode::kInvalidInput,
            "detection grid mixes levels or patch sizes");
  }

  TriageContext triage_ctx;
  triage_ctx.pyramid = &pyramid;
  triage_ctx.handles = {ctx.tumor, ctx.magnified};
  triage_ctx.prepare = ctx.preparation;
  triage_ctx.cfg = ctx.triage;

  map.records.resize(grid.size());
  parallel_for(grid.size(), ctx.workers, [&](std::size_t i) {
    const PatchCoordinate& coord = grid[i];
    TumorRecord& rec = map.records[i];
    rec.coord = coord;
    const Patch prepared = ctx.preparation.prepare(read_region(pyramid, coord), *ctx.tumor,
                                                   &rec.stain_pass_through);
    const double p = ctx.tumor->positive_probability(prepared);
    rec.p_tumor = p;
    TriageOutcome outcome = triage_patch(triage_ctx, coord, prepared, p);
    rec.is_tumor = outcome.final_verdict.is_tumor;
    rec.provenance = outcome.final_verdict.provenance;
    rec.triaged = outcome.triaged;
    if (outcome.triaged) rec.triage = std::move(outcome);
  });
  return map;
}

double patch_area_mm2(int patch_size, double mpp) {
  require(patch_size > 0 && mpp > 0.0, ErrorCode::kInvalidInput, "patch size and mpp must be positive");
  const double side = static_cast<double>(patch_size) * mpp / 1000.0;
  return side * side;
}

SlideMetrics slide_metrics(const TumorMap& map, double mpp, int patch_size, const BinaryMask* mask) {
  if (mask) {
    require(mask->level == map.level, ErrorCode::kInvalidInput,
            "tissue mask level does not match the tumor map");
  }
  SlideMetrics m;
  m.patch_area_mm2 = patch_area_mm2(patch_size, mpp);
  m.tissue_patch_count = map.records.size();
  m.tumor_patch_count = map.tumor_count();
  m.tissue_area_mm2 = static_cast<double>(m.tissue_patch_count) * m.patch_area_mm2;
  m.tumor_area_mm2 = static_cast<double>(m.tumor_patch_count) * m.patch_area_mm2;
  m.tumor_fraction = m.tissue_patch_count == 0
                         ? 0.0
                         : static_cast<double>(m.tumor_patch_count) /
                               static_cast<double>(m.tissue_patch_count);
  return m;
}

namespace {

struct Rect {
  std::int64_t x0, y0, x1, y1;
};

Rect base_rect(const PatchCoordinate& c) {
  const std::int64_t s = std::int64_t{1} << c.level;
  return {c.x * s, c.y * s, (c.x + c.size) * s, (c.y + c.size) * s};
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

}  // namespace

std::vector<PatchCoordinate> tumor_region_grid(const SlidePyramid& pyramid, const TumorMap& map,
                                               int level, int patch_size, double min_overlap) {
  require(pyramid.has_level(level), ErrorCode::kInvalidInput, "region level out of range");
  require(patch_size > 0, ErrorCode::kInvalidInput, "patch size must be positive");
  require(min_overlap > 0.0 && min_overlap <= 1.0, ErrorCode::kInvalidInput,
          "min_overlap must be in (0, 1]");
  const Level& lv = pyramid.level(level);
  const std::int64_t cols = (lv.width + patch_size - 1) / patch_size;
  const std::int64_t rows = (lv.height + patch_size - 1) / patch_size;
  const std::int64_t cell = static_cast<std::int64_t>(patch_size) << level;

  std::vector<Rect> tumor;
  for (const auto& r : map.records) {
    if (r.is_tumor) tumor.push_back(base_rect(r.coord));
  }

  // Candidate cells touched by any tumor rectangle, ordered row-major.
  std::set<std::pair<std::int64_t, std::int64_t>> candidates;
  for (const Rect& t : tumor) {
    const std::int64_t c0 = std::max<std::int64_t>(0, floor_div(t.x0, cell));
    const std::int64_t c1 = std::min(cols - 1, floor_div(t.x1 - 1, cell));
    const std::int64_t r0 = std::max<std::int64_t>(0, floor_div(t.y0, cell));
    const std::int64_t r1 = std::min(rows - 1, floor_div(t.y1 - 1, cell));
    for (std::int64_t r = r0; r <= r1; ++r) {
      for (std::int64_t c = c0; c <= c1; ++c) candidates.emplace(r, c);
    }
  }

  // Detection patches form a non-overlapping grid, so summing pairwise
  // intersections gives the covered area.
  const double cell_area = static_cast<double>(cell) * static_cast<double>(cell);
  std::vector<PatchCoordinate> out;
  for (const auto& [r, c] : candidates) {
    const Rect q{c * cell, r * cell, (c + 1) * cell, (r + 1) * cell};
    double covered = 0.0;
    for (const Rect& t : tumor) {
      const std::int64_t w = std::min(q.x1, t.x1) - std::max(q.x0, t.x0);
      const std::int64_t h = std::min(q.y1, t.y1) - std::max(q.y0, t.y0);
      if (w > 0 && h > 0) covered += static_cast<double>(w) * static_cast<double>(h);
    }
    if (covered >= min_overlap * cell_area) {
      out.push_back({level, c * patch_size, r * patch_size, patch_size});
    }
  }
  return out;
}

// ---- subtypes ---------------------------------------------------------------

void SubtypeAccumulator::add(const SubtypeRecord& record) {
  require(record.probs.size() == counts_.size() && record.label < counts_.size(),
          ErrorCode::kSchemaMismatch, "subtype record arity does not match the accumulator");
  ++counts_[record.label];
  prob_sums_[record.label].add(record.probs[record.label]);
}

void SubtypeAccumulator::merge(const SubtypeAccumulator& other) {
  require(other.counts_.size() == counts_.size(), ErrorCode::kSchemaMismatch,
          "cannot merge subtype accumulators of different arity");
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    counts_[k] += other.counts_[k];
    prob_sums_[k].merge(other.prob_sums_[k]);
  }
}

SubtypeSummary SubtypeAccumulator::finish(double patch_area_mm2) const {
  SubtypeSummary s;
  for (auto c : counts_) s.tumor_patch_count += c;
  require(s.tumor_patch_count > 0, ErrorCode::kNoTumorDetected, "no tumor patches to subtype");
  const auto& labels = LabelSchema::for_task(Task::kSubtype3).labels;
  s.patch_area_mm2 = patch_area_mm2;
  const double total = static_cast<double>(s.tumor_patch_count);
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    SubtypeLabelStats st;
    st.label = k < labels.size() ? labels[k] : std::to_string(k);
    st.patch_count = counts_[k];
    st.proportion = static_cast<double>(counts_[k]) / total;
    st.area_mm2 = static_cast<double>(counts_[k]) * patch_area_mm2;
    st.mean_probability = prob_sums_[k].mean(counts_[k]);
    s.per_label.push_back(std::move(st));
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < s.per_label.size(); ++k) {
    const auto& a = s.per_label[k];
    const auto& b = s.per_label[best];
    if (a.patch_count > b.patch_count ||
        (a.patch_count == b.patch_count && a.mean_probability > b.mean_probability)) {
      best = k;
    }
  }
  s.slide_label = best;
  s.slide_confidence = s.per_label[best].mean_probability;
  return s;
}

SubtypeSummary aggregate_subtypes(std::span<const SubtypeRecord> records, double patch_area_mm2) {
  SubtypeAccumulator acc(LabelSchema::for_task(Task::kSubtype3).labels.size());
  for (const auto& r : records) acc.add(r);
  return acc.finish(patch_area_mm2);
}

std::vector<SubtypeRecord> predict_subtypes(const SlidePyramid& pyramid,
                                            std::span<const PatchCoordinate> coords,
                                            const Classifier& classifier,
                                            const RegionTaskContext& ctx) {
  require(classifier.task() == Task::kSubtype3, ErrorCode::kSchemaMismatch,
          "subtype classifier must be a subtype3 model");
  ctx.preparation.check_compatible(classifier);
  std::vector<SubtypeRecord> records(coords.size());
  parallel_for(coords.size(), ctx.workers, [&](std::size_t i) {
    const Patch prepared = ctx.preparation(read_region(pyramid, coords[i]), classifier);
    LabelProbs probs = classifier.predict(prepared);
    records[i].coord = coords[i];
    records[i].label = argmax_label(probs);
    records[i].probs = std::move(probs.values);
  });
  return records;
}

SubtypeSummary classify_subtypes(const SlidePyramid& pyramid, const TumorMap& map,
                                 const Classifier& subtype_classifier, const RegionTaskContext& ctx,
                                 std::vector<SubtypeRecord>* records_out) {
  require(map.tumor_count() > 0, ErrorCode::kNoTumorDetected, "tumor map has no tumor patches");
  const auto coords =
      tumor_region_grid(pyramid, map, ctx.level, ctx.patch_size, ctx.min_tumor_overlap);
  require(!coords.empty(), ErrorCode::kNoTumorDetected,
          "tumor region covers no subtype patch at the required overlap");
  auto records = predict_subtypes(pyramid, coords, subtype_classifier, ctx);
  SubtypeSummary s =
      aggregate_subtypes(records, patch_area_mm2(ctx.patch_size, pyramid.mpp_at(ctx.level)));
  if (records_out) *records_out = std::move(records);
  return s;
}

// ---- grades -----------------------------------------------------------------

void GradeAccumulator::add(const GradeRecord& record) {
  ++count_;
  if (record.is_g4) {
    ++g4_count_;
    return;
  }
  require(record.g123.has_value(), ErrorCode::kInvalidInput,
          "non-G4 grade record lacks G1-G3 probabilities");
  for (std::size_t k = 0; k < 3; ++k) sums_[k].add((*record.g123)[k]);
}

void GradeAccumulator::merge(const GradeAccumulator& other) {
  count_ += other.count_;
  g4_count_ += other.g4_count_;
  for (std::size_t k = 0; k < 3; ++k) sums_[k].merge(other.sums_[k]);
}

GradeSummary GradeAccumulator::finish(double g4_override) const {
  require(count_ > 0, ErrorCode::kInvalidInput, "no grade records to aggregate");
  require(g4_override >= 0.0 && g4_override <= 1.0, ErrorCode::kInvalidInput,
          "g4_override must be in [0, 1]");
  GradeSummary s;
  s.patch_count = count_;
  s.g4_count = g4_count_;
  s.g4_fraction = static_cast<double>(g4_count_) / static_cast<double>(count_);
  const std::size_t rest = count_ - g4_count_;
  for (std::size_t k = 0; k < 3; ++k) s.mean_probs_g123[k] = sums_[k].mean(rest);

  const double keep = 1.0 - s.g4_fraction;
  std::array<double, 4> raw{s.mean_probs_g123[0] * keep, s.mean_probs_g123[1] * keep,
                            s.mean_probs_g123[2] * keep, s.g4_fraction};
  const double total = raw[0] + raw[1] + raw[2] + raw[3];
  for (std::size_t k = 0; k < 4; ++k) s.grade_percentages[k] = raw[k] / total;

  if (s.g4_fraction >= g4_override || rest == 0) {
    s.slide_grade = 4;
  } else {
    s.slide_grade = 1 + static_cast<int>(argmax_index(s.mean_probs_g123));
  }
  return s;
}

GradeSummary aggregate_grade(std::span<const GradeRecord> records, double g4_override) {
  GradeAccumulator acc;
  for (const auto& r : records) acc.add(r);
  return acc.finish(g4_override);
}

GradeRecord grade_patch(const Classifier& g4_classifier, const Classifier& g123_classifier,
                        const Patch& g4_input, const Patch& g123_input, double g4_threshold) {
  GradeRecord rec;
  rec.coord = g4_input.origin;
  rec.p_g4 = g4_classifier.positive_probability(g4_input);
  rec.is_g4 = rec.p_g4 >= g4_threshold;
  if (!rec.is_g4) {
    const LabelProbs probs = g123_classifier.predict(g123_input);
    rec.g123 = std::array<double, 3>{probs.values[0], probs.values[1], probs.values[2]};
  }
  return rec;
}

std::vector<GradeRecord> grade_patches(const SlidePyramid& pyramid,
                                       std::span<const PatchCoordinate> coords,
                                       const Classifier& g4_classifier,
                                       const Classifier& g123_classifier,
                                       const RegionTaskContext& ctx, double g4_threshold) {
  require(g4_classifier.task() == Task::kG4Binary, ErrorCode::kSchemaMismatch,
          "G4 classifier must be a g4_binary model");
  require(g123_classifier.task() == Task::kGrade3, ErrorCode::kSchemaMismatch,
          "grade classifier must be a grade3 model");
  ctx.preparation.check_compatible(g4_classifier);
  ctx.preparation.check_compatible(g123_classifier);
  std::vector<GradeRecord> records(coords.size());
  parallel_for(coords.size(), ctx.workers, [&](std::size_t i) {
    const Patch raw = read_region(pyramid, coords[i]);
    const Patch g4_in = ctx.preparation(raw, g4_classifier);
    const Patch g123_in = ctx.preparation(raw, g123_classifier);
    records[i] = grade_patch(g4_classifier, g123_classifier, g4_in, g123_in, g4_threshold);
    records[i].coord = coords[i];
  });
  return records;
}

std::vector<GradeRecord> grade_patches(const SlidePyramid& pyramid, const TumorMap& map,
                                       const Classifier& g4_classifier,
                                       const Classifier& g123_classifier,
                                       const RegionTaskContext& ctx, double g4_threshold) {
  require(map.tumor_count() > 0, ErrorCode::kNoTumorDetected, "tumor map has no tumor patches");
  const auto coords =
      tumor_region_grid(pyramid, map, ctx.level, ctx.patch_size, ctx.min_tumor_overlap);
  require(!coords.empty(), ErrorCode::kNoTumorDetected,
          "tumor region covers no grade patch at the required overlap");
  return grade_patches(pyramid, coords, g4_classifier, g123_classifier, ctx, g4_threshold);
}

}  // namespace rccpath
