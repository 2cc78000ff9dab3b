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
#include <atomic>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rccpath/diagnosis.h"
#include "rccpath/error.h"
#include "rccpath/exact_sum.h"
#include "rccpath/slide_store.h"
#include "rccpath/worker_pool.h"
#include "support/test_support.h"

namespace rccpath {
namespace {

using testing::solid;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no rccpath::Error raised";
  return ErrorCode::kInvalidInput;
}

// 512 x 512 tissue slide, 64 px tiles; level 1 (0.5 um/px) holds an 8 x 8
// grid of 32 px detection patches.
struct Slide {
  SlidePyramid pyr = testing::pyramid_from(solid(512, 512, 200, 100, 150), 64);
  BinaryMask mask = tissue_mask(pyr, 1, kDefaultTissueOdThreshold, 16);
  std::vector<PatchCoordinate> grid = grid_patches(pyr, 0.5, 32, mask);
};

ClassifierHandle lookup(Task task, int size, std::vector<LookupEntry> entries,
                        std::optional<std::vector<double>> fallback) {
  LookupOptions o;
  o.task = task;
  o.input_size = size;
  o.default_values = std::move(fallback);
  return make_lookup_classifier(o, std::move(entries));
}

DetectionContext detection(ClassifierHandle tumor, int workers = 1) {
  DetectionContext ctx;
  ctx.tumor = std::move(tumor);
  ctx.workers = workers;
  return ctx;
}

TEST(DetectTumor, PlantedSquareIsRecoveredExactly) {
  const Slide s;
  ASSERT_EQ(s.grid.size(), 64u);
  std::set<std::pair<std::int64_t, std::int64_t>> planted = {{96, 64}, {128, 64}, {96, 96}, {128, 96}};
  std::vector<LookupEntry> entries;
  for (const auto& [x, y] : planted) entries.push_back({{1, x, y}, {0.05, 0.95}});
  const TumorMap map = detect_tumor(s.pyr, s.grid, detection(lookup(Task::kTumor2, 32, entries, {{0.95, 0.05}})));
  ASSERT_EQ(map.records.size(), 64u);
  EXPECT_EQ(map.level, 1);
  EXPECT_EQ(map.patch_size, 32);
  for (const auto& r : map.records) {
    EXPECT_EQ(r.is_tumor, planted.count({r.coord.x, r.coord.y}) == 1) << r.coord.x << "," << r.coord.y;
    EXPECT_FALSE(r.triaged);
    EXPECT_EQ(r.provenance, Provenance::kBase);
  }
  EXPECT_EQ(map.tumor_count(), 4u);
  EXPECT_EQ(map.triaged_count(), 0u);
  EXPECT_EQ(map.trigger_rate(), 0.0);
}

TEST(DetectTumor, BandInteriorPatchesGoToVote) {
  const Slide s;
  std::vector<LookupEntry> grid_half;
  for (const auto& c : s.grid) grid_half.push_back({{c.level, c.x, c.y}, {0.5, 0.5}});

  // Strategy reads off the grid (finer level, half-offset neighbors) see 0.9.
  const TumorMap yes = detect_tumor(s.pyr, s.grid, detection(lookup(Task::kTumor2, 32, grid_half, {{0.1, 0.9}})));
  EXPECT_EQ(yes.tumor_count(), 64u);
  EXPECT_EQ(yes.triaged_count(), 64u);
  EXPECT_EQ(yes.trigger_rate(), 1.0);
  for (const auto& r : yes.records) {
    EXPECT_EQ(r.provenance, Provenance::kVote);
    ASSERT_TRUE(r.triage);
    EXPECT_EQ(r.triage->magnification->probability, 0.9);
    EXPECT_EQ(r.triage->neighbor->probability, 0.9);
  }

  const TumorMap no = detect_tumor(s.pyr, s.grid, detection(lookup(Task::kTumor2, 32, grid_half, {{0.9, 0.1}})));
  EXPECT_EQ(no.tumor_count(), 0u);
  EXPECT_EQ(no.triaged_count(), 64u);
}

TEST(DetectTumor, ConfidentPatchesAreNeverTriaged) {
  const Slide s;
  const TumorMap map = detect_tumor(s.pyr, s.grid, detection(lookup(Task::kTumor2, 32, {}, {{0.05, 0.95}})));
  EXPECT_EQ(map.tumor_count(), 64u);
  EXPECT_EQ(map.triaged_count(), 0u);
}

TEST(DetectTumor, ErrorsAndWorkerIndependence) {
  const Slide s;
  EXPECT_EQ(code_of([&] {
              detect_tumor(s.pyr, std::span<const PatchCoordinate>(), detection(lookup(Task::kTumor2, 32, {}, {{0.5, 0.5}})));
            }),
            ErrorCode::kEmptySlide);
  EXPECT_EQ(code_of([&] { detect_tumor(s.pyr, s.grid, detection(lookup(Task::kSubtype3, 32, {}, {{1, 0, 0}}))); }),
            ErrorCode::kSchemaMismatch);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<LookupEntry> entries;
  for (const auto& c : s.grid) {
    const double p = u(rng);
    entries.push_back({{c.level, c.x, c.y}, {1.0 - p, p}});
  }
  const auto clf = lookup(Task::kTumor2, 32, entries, {{0.3, 0.7}});
  const TumorMap ref = detect_tumor(s.pyr, s.grid, detection(clf, 1));
  for (int w : {2, 3, 8}) {
    const TumorMap other = detect_tumor(s.pyr, s.grid, detection(clf, w));
    ASSERT_EQ(other.records.size(), ref.records.size());
    for (std::size_t i = 0; i < ref.records.size(); ++i) {
      EXPECT_EQ(other.records[i].coord, ref.records[i].coord);
      EXPECT_EQ(other.records[i].p_tumor, ref.records[i].p_tumor);
      EXPECT_EQ(other.records[i].is_tumor, ref.records[i].is_tumor);
      EXPECT_EQ(other.records[i].triaged, ref.records[i].triaged);
      EXPECT_EQ(other.records[i].provenance, ref.records[i].provenance);
    }
  }
}

TumorMap synthetic_map(std::size_t tissue, std::size_t tumor) {
  TumorMap m;
  m.patch_size = 512;
  m.mpp = 0.25;
  for (std::size_t i = 0; i < tissue; ++i) {
    TumorRecord r;
    r.coord = {0, static_cast<std::int64_t>(i) * 512, 0, 512};
    r.is_tumor = i < tumor;
    m.records.push_back(r);
  }
  return m;
}

TEST(SlideMetrics, Examples) {
  EXPECT_NEAR(patch_area_mm2(512, 0.25), 0.016384, 1e-15);
  const SlideMetrics m = slide_metrics(synthetic_map(100, 25), 0.25, 512);
  EXPECT_EQ(m.tissue_patch_count, 100u);
  EXPECT_EQ(m.tumor_patch_count, 25u);
  EXPECT_DOUBLE_EQ(m.tumor_fraction, 0.25);
  EXPECT_NEAR(m.tissue_area_mm2, 1.6384, 1e-12);
  EXPECT_NEAR(m.tumor_area_mm2, 0.4096, 1e-12);

  const SlideMetrics zero = slide_metrics(synthetic_map(0, 0), 0.25, 512);
  EXPECT_EQ(zero.tissue_area_mm2, 0.0);
  EXPECT_EQ(zero.tumor_area_mm2, 0.0);
  EXPECT_EQ(zero.tumor_fraction, 0.0);
}

TEST(SlideMetrics, TumorNeverExceedsTissue) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const std::size_t tissue = rng() % 500;
    const std::size_t tumor = tissue == 0 ? 0 : rng() % (tissue + 1);
    const SlideMetrics m = slide_metrics(synthetic_map(tissue, tumor), 0.25, 512);
    EXPECT_LE(m.tumor_area_mm2, m.tissue_area_mm2);
    EXPECT_GE(m.tumor_fraction, 0.0);
    EXPECT_LE(m.tumor_fraction, 1.0);
  }
}

TEST(TumorRegionGrid, OverlapRule) {
  const Slide s;
  // Tumor detections at level 1 cover level-0 square [128, 256) x [128, 256).
  TumorMap map;
  map.level = 1;
  map.patch_size = 32;
  for (std::int64_t y = 64; y < 128; y += 32) {
    for (std::int64_t x = 64; x < 128; x += 32) {
      TumorRecord r;
      r.coord = {1, x, y, 32};
      r.is_tumor = true;
      map.records.push_back(r);
    }
  }
  // Level 0, 128 px cells: exactly cell (1, 1) is covered.
  EXPECT_EQ(tumor_region_grid(s.pyr, map, 0, 128), (std::vector<PatchCoordinate>{{0, 128, 128, 128}}));
  // 96 px cells: cell (1,1) spans [96,192) and is 64*64/96^2 = 0.44 covered,
  // cell (2,2) spans [192,288) and is also 0.44 covered.
  EXPECT_TRUE(tumor_region_grid(s.pyr, map, 0, 96).empty());
  EXPECT_EQ(tumor_region_grid(s.pyr, map, 0, 96, 0.4).size(), 4u);
  // Level 1, 64 px cells line up with the detections.
  EXPECT_EQ(tumor_region_grid(s.pyr, map, 1, 64), (std::vector<PatchCoordinate>{{1, 64, 64, 64}}));
}

SubtypeRecord subtype(std::vector<double> probs) {
  SubtypeRecord r;
  r.label = argmax_index(probs);
  r.probs = std::move(probs);
  return r;
}

TEST(Subtypes, CountingExamples) {
  std::vector<SubtypeRecord> records;
  for (int i = 0; i < 60; ++i) records.push_back(subtype({0.8, 0.1, 0.1}));
  for (int i = 0; i < 30; ++i) records.push_back(subtype({0.2, 0.7, 0.1}));
  for (int i = 0; i < 10; ++i) records.push_back(subtype({0.1, 0.3, 0.6}));
  const SubtypeSummary s = aggregate_subtypes(records, 1.0);
  ASSERT_EQ(s.per_label.size(), 3u);
  EXPECT_DOUBLE_EQ(s.per_label[0].proportion, 0.6);
  EXPECT_DOUBLE_EQ(s.per_label[1].proportion, 0.3);
  EXPECT_DOUBLE_EQ(s.per_label[2].proportion, 0.1);
  EXPECT_EQ(s.per_label[0].patch_count, 60u);
  EXPECT_DOUBLE_EQ(s.per_label[1].area_mm2, 30.0);
  EXPECT_EQ(s.slide_label_name(), "ccRCC");
  EXPECT_NEAR(s.slide_confidence, 0.8, 1e-15);

  std::vector<SubtypeRecord> all_cc(7, subtype({0.9, 0.05, 0.05}));
  const SubtypeSummary cc = aggregate_subtypes(all_cc, 1.0);
  EXPECT_EQ(cc.per_label[0].proportion, 1.0);
  EXPECT_EQ(cc.per_label[1].proportion, 0.0);
  EXPECT_EQ(cc.slide_label, 0u);
}

TEST(Subtypes, TieGoesToHigherMeanProbability) {
  std::vector<SubtypeRecord> records;
  for (int i = 0; i < 5; ++i) records.push_back(subtype({0.7, 0.2, 0.1}));
  for (int i = 0; i < 5; ++i) records.push_back(subtype({0.05, 0.9, 0.05}));
  const SubtypeSummary s = aggregate_subtypes(records, 1.0);
  EXPECT_EQ(s.slide_label_name(), "pRCC");
  EXPECT_NEAR(s.slide_confidence, 0.9, 1e-15);

  // Full tie falls to the lower index.
  std::vector<SubtypeRecord> even = {subtype({0.1, 0.2, 0.7}), subtype({0.2, 0.7, 0.1})};
  EXPECT_EQ(aggregate_subtypes(even, 1.0).slide_label, 1u);

  EXPECT_EQ(code_of([] { aggregate_subtypes({}, 1.0); }), ErrorCode::kNoTumorDetected);
}

TEST(Subtypes, OrderAndSplitIndependence) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<SubtypeRecord> records;
    const std::size_t n = 1 + rng() % 300;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = u(rng), b = u(rng), c = u(rng);
      records.push_back(subtype({a / (a + b + c), b / (a + b + c), c / (a + b + c)}));
    }
    const SubtypeSummary ref = aggregate_subtypes(records, 0.5);
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& l : ref.per_label) {
      sum += l.proportion;
      count += l.patch_count;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_EQ(count, n);

    std::shuffle(records.begin(), records.end(), rng);
    SubtypeAccumulator left, right;
    const std::size_t cut = rng() % (n + 1);
    for (std::size_t i = 0; i < n; ++i) (i < cut ? left : right).add(records[i]);
    right.merge(left);
    EXPECT_EQ(right.finish(0.5), ref);
  }
}

TEST(Subtypes, ClassifyOverDetectedRegion) {
  const Slide s;
  TumorMap map;
  map.level = 1;
  map.patch_size = 32;
  for (const auto& c : s.grid) {
    TumorRecord r;
    r.coord = c;
    r.is_tumor = c.x < 128;  // left half of the level-1 image
    map.records.push_back(r);
  }
  // 64 px cells at level 1: the left half holds 2 x 4 of them.
  std::vector<LookupEntry> entries = {{{1, 0, 0}, {0.1, 0.8, 0.1}}, {{1, 64, 0}, {0.1, 0.8, 0.1}}};
  const auto clf = lookup(Task::kSubtype3, 64, entries, {{0.6, 0.3, 0.1}});
  RegionTaskContext ctx;
  ctx.level = 1;
  ctx.patch_size = 64;
  std::vector<SubtypeRecord> out;
  const SubtypeSummary sum = classify_subtypes(s.pyr, map, *clf, ctx, &out);
  EXPECT_EQ(out.size(), 8u);
  EXPECT_EQ(sum.tumor_patch_count, 8u);
  EXPECT_EQ(sum.per_label[0].patch_count, 6u);
  EXPECT_EQ(sum.per_label[1].patch_count, 2u);
  EXPECT_NEAR(sum.patch_area_mm2, patch_area_mm2(64, 0.5), 1e-15);

  for (auto& r : map.records) r.is_tumor = false;
  EXPECT_EQ(code_of([&] { classify_subtypes(s.pyr, map, *clf, ctx); }), ErrorCode::kNoTumorDetected);
}

GradeRecord g4(double p = 0.9) { return {{}, p, true, std::nullopt}; }
GradeRecord g123(double a, double b, double c, double p = 0.1) {
  return {{}, p, false, std::array<double, 3>{a, b, c}};
}

TEST(Grades, Examples) {
  const GradeSummary all = aggregate_grade(std::vector<GradeRecord>(5, g4()));
  EXPECT_EQ(all.slide_grade, 4);
  EXPECT_EQ(all.grade_percentages, (std::array<double, 4>{0, 0, 0, 1}));

  const GradeSummary mix = aggregate_grade(std::vector<GradeRecord>{g123(0.6, 0.3, 0.1), g123(0.4, 0.5, 0.1)});
  EXPECT_NEAR(mix.mean_probs_g123[0], 0.5, 1e-15);
  EXPECT_NEAR(mix.mean_probs_g123[1], 0.4, 1e-15);
  EXPECT_NEAR(mix.mean_probs_g123[2], 0.1, 1e-15);
  EXPECT_EQ(mix.slide_grade, 1);

  std::vector<GradeRecord> low(24, g123(0.1, 0.3, 0.6));
  low.push_back(g4());
  const GradeSummary under = aggregate_grade(low);
  EXPECT_DOUBLE_EQ(under.g4_fraction, 0.04);
  EXPECT_EQ(under.slide_grade, 3);
  EXPECT_NEAR(under.grade_percentages[3], 0.04, 1e-15);
  EXPECT_NEAR(under.grade_percentages[2], 0.6 * 0.96, 1e-12);

  std::vector<GradeRecord> at(19, g123(0.1, 0.3, 0.6));
  at.push_back(g4());
  EXPECT_EQ(aggregate_grade(at).slide_grade, 4);  // 1/20 = 0.05 meets the override

  EXPECT_EQ(code_of([] { aggregate_grade({}); }), ErrorCode::kInvalidInput);
}

struct GradeOracle {
  double g4_fraction;
  std::array<double, 3> mean;
  std::array<double, 4> pct;
  int grade;
};

// Straight-line single pass in long double.
GradeOracle grade_oracle(const std::vector<GradeRecord>& rs, double override_at) {
  long double s[3] = {0, 0, 0};
  std::size_t g4n = 0;
  for (const auto& r : rs) {
    if (r.is_g4) {
      ++g4n;
    } else {
      for (int k = 0; k < 3; ++k) s[k] += (*r.g123)[static_cast<std::size_t>(k)];
    }
  }
  GradeOracle o{};
  const std::size_t rest = rs.size() - g4n;
  o.g4_fraction = static_cast<double>(g4n) / static_cast<double>(rs.size());
  for (int k = 0; k < 3; ++k) o.mean[k] = rest ? static_cast<double>(s[k] / rest) : 0.0;
  long double raw[4];
  long double total = 0;
  for (int k = 0; k < 3; ++k) total += raw[k] = static_cast<long double>(o.mean[k]) * (1 - o.g4_fraction);
  total += raw[3] = o.g4_fraction;
  for (int k = 0; k < 4; ++k) o.pct[k] = static_cast<double>(raw[k] / total);
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (o.mean[k] > o.mean[best]) best = k;
  }
  o.grade = (o.g4_fraction >= override_at || rest == 0) ? 4 : best + 1;
  return o;
}

std::vector<GradeRecord> random_grades(std::mt19937_64& rng, std::size_t n, double g4_rate) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<GradeRecord> rs;
  for (std::size_t i = 0; i < n; ++i) {
    if (u(rng) < g4_rate) {
      rs.push_back(g4(0.5 + 0.5 * u(rng)));
    } else {
      const double a = u(rng), b = u(rng), c = u(rng);
      rs.push_back(g123(a / (a + b + c), b / (a + b + c), c / (a + b + c), 0.5 * u(rng)));
    }
  }
  return rs;
}

TEST(Grades, MatchesBruteForceOracle) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % (t < 20 ? 10000 : 500);
    const double rate = std::uniform_real_distribution<double>(0.0, 0.12)(rng);
    const auto rs = random_grades(rng, n, rate);
    const GradeSummary got = aggregate_grade(rs);
    const GradeOracle want = grade_oracle(rs, kDefaultG4Override);
    EXPECT_NEAR(got.g4_fraction, want.g4_fraction, 1e-12);
    double pct_sum = 0.0;
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(got.mean_probs_g123[k], want.mean[k], 1e-12);
    for (int k = 0; k < 4; ++k) {
      EXPECT_NEAR(got.grade_percentages[k], want.pct[k], 1e-12);
      pct_sum += got.grade_percentages[k];
    }
    EXPECT_NEAR(pct_sum, 1.0, 1e-9);
    EXPECT_EQ(got.slide_grade, want.grade);
  }
}

TEST(Grades, DuplicationAndPermutationInvariance) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    auto rs = random_grades(rng, 1 + rng() % 200, 0.06);
    const GradeSummary ref = aggregate_grade(rs);
    auto doubled = rs;
    doubled.insert(doubled.end(), rs.begin(), rs.end());
    EXPECT_EQ(aggregate_grade(doubled).slide_grade, ref.slide_grade);
    std::shuffle(rs.begin(), rs.end(), rng);
    EXPECT_EQ(aggregate_grade(rs), ref);
  }
}

TEST(Grades, PatchDichotomy) {
  const Patch p = [] {
    Patch x;
    x.image = solid(8, 8, 0, 0, 0);
    x.origin = {0, 0, 0, 8};
    return x;
  }();
  const auto g4_hi = lookup(Task::kG4Binary, 8, {}, {{0.1, 0.9}});
  const auto g4_lo = lookup(Task::kG4Binary, 8, {}, {{0.9, 0.1}});
  const auto g3 = lookup(Task::kGrade3, 8, {}, {{0.2, 0.5, 0.3}});
  const GradeRecord hi = grade_patch(*g4_hi, *g3, p, p);
  EXPECT_TRUE(hi.is_g4);
  EXPECT_FALSE(hi.g123);
  const GradeRecord lo = grade_patch(*g4_lo, *g3, p, p);
  EXPECT_FALSE(lo.is_g4);
  ASSERT_TRUE(lo.g123);
  EXPECT_EQ(*lo.g123, (std::array<double, 3>{0.2, 0.5, 0.3}));
}

TEST(Grades, RecordsMatchFixtureAcrossWorkers) {
  const Slide s;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PatchCoordinate> coords(s.grid.begin(), s.grid.begin() + 10);
  std::vector<LookupEntry> g4e, g3e;
  for (const auto& c : coords) {
    const double p = u(rng);
    g4e.push_back({{c.level, c.x, c.y}, {1.0 - p, p}});
    const double a = u(rng), b = u(rng), d = u(rng);
    g3e.push_back({{c.level, c.x, c.y}, {a / (a + b + d), b / (a + b + d), d / (a + b + d)}});
  }
  const auto g4c = lookup(Task::kG4Binary, 32, g4e, std::nullopt);
  const auto g3c = lookup(Task::kGrade3, 32, g3e, std::nullopt);
  RegionTaskContext ctx;
  ctx.level = 1;
  ctx.patch_size = 32;
  const auto ref = grade_patches(s.pyr, coords, *g4c, *g3c, ctx);
  ASSERT_EQ(ref.size(), 10u);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_EQ(ref[i].coord, coords[i]);
    EXPECT_EQ(ref[i].p_g4, g4e[i].values[1]);
    EXPECT_EQ(ref[i].is_g4, g4e[i].values[1] >= 0.5);
    if (!ref[i].is_g4) {
      EXPECT_EQ(std::vector<double>(ref[i].g123->begin(), ref[i].g123->end()), g3e[i].values);
    }
  }
  for (int w : {2, 8}) {
    ctx.workers = w;
    const auto other = grade_patches(s.pyr, coords, *g4c, *g3c, ctx);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(other[i].p_g4, ref[i].p_g4);
      EXPECT_EQ(other[i].g123, ref[i].g123);
    }
  }
  EXPECT_EQ(code_of([&] { grade_patches(s.pyr, coords, *g3c, *g3c, ctx); }), ErrorCode::kSchemaMismatch);
}

TEST(Kappa, Examples) {
  EXPECT_EQ(cohens_kappa(std::vector<int>{1, 2, 3, 1}, std::vector<int>{1, 2, 3, 1}), 1.0);
  EXPECT_DOUBLE_EQ(cohens_kappa(std::vector<int>{1, 1, 2, 2}, std::vector<int>{2, 2, 1, 1}), -1.0);
  EXPECT_DOUBLE_EQ(cohens_kappa(std::vector<int>{1, 1, 1, 2}, std::vector<int>{1, 1, 2, 2}), 0.5);
  EXPECT_EQ(cohens_kappa(std::vector<int>{3, 3, 3}, std::vector<int>{3, 3, 3}), 1.0);
  EXPECT_EQ(code_of([] { cohens_kappa(std::vector<int>{1}, std::vector<int>{1, 2}); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { cohens_kappa(std::vector<int>{}, std::vector<int>{}); }), ErrorCode::kInvalidInput);
  EXPECT_DOUBLE_EQ(cohens_kappa(std::vector<std::string>{"a", "b"}, std::vector<std::string>{"a", "a"}), 0.0);
}

TEST(Kappa, OneIffIdentical) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 20;
    const int k = 1 + static_cast<int>(rng() % 4);
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = static_cast<int>(rng() % k);
    b = a;
    if (rng() % 2) b[rng() % n] = static_cast<int>(rng() % k);
    const double kappa = cohens_kappa(a, b);
    EXPECT_EQ(kappa == 1.0, a == b) << "n=" << n;
    EXPECT_LE(kappa, 1.0);
    EXPECT_GE(kappa, -1.0);
  }
}

TEST(ExactSum, OrderIndependent) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(10000);
  for (double& x : v) x = u(rng);
  ExactSum a;
  for (double x : v) a.add(x);
  std::shuffle(v.begin(), v.end(), rng);
  ExactSum b, c;
  for (std::size_t i = 0; i < v.size(); ++i) (i % 3 ? b : c).add(v[i]);
  b.merge(c);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.value(), b.value());
  EXPECT_EQ(code_of([] { ExactSum().add(1.5); }), ErrorCode::kInvalidInput);
}

TEST(ParallelFor, CoversEveryIndexAndRethrowsLowestFailure) {
  for (int w : {1, 2, 8}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), w, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);

    try {
      parallel_for(100, w, [](std::size_t i) {
        if (i == 17 || i == 60) fail(ErrorCode::kBackendError, "index " + std::to_string(i));
      });
      ADD_FAILURE() << "no exception";
    } catch (const Error& e) {
      EXPECT_EQ(e.detail(), "index 17");
    }
  }
  parallel_for(0, 4, [](std::size_t) { ADD_FAILURE(); });
}

}  // namespace
}  // namespace rccpath
