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

// Heatmap overlays and the whole-case report.

#ifndef RCCPATH_RENDER_REPORT_H_
#define RCCPATH_RENDER_REPORT_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rccpath/diagnosis.h"
#include "rccpath/image.h"
#include "rccpath/slide_store.h"

namespace rccpath {

inline constexpr double kDefaultHeatmapAlpha = 0.4;
inline constexpr int kReportSchemaVersion = 1;

enum class HeatmapMode { kProbability, kLabel };

/// One grid cell of a heatmap: a probability in [0, 1] or a label index.
struct HeatmapCell {
  PatchCoordinate coord;
  double value = 0.0;
};

/// Linear blue (0,0,255) to red (255,0,0) ramp, green fixed at 0.
std::array<std::uint8_t, 3> probability_color(double p);

/// Fixed categorical palette; throws InvalidInput past its end.
std::array<std::uint8_t, 3> label_color(std::size_t label);
inline constexpr std::size_t kLabelPaletteSize = 8;

/// Finest level whose larger dimension is at most max_dim, but never finer
/// than min_level. Falls back to the coarsest level.
int thumbnail_level(const SlidePyramid& pyramid, int max_dim, int min_level = 0);

/// Paints each cell's color over the level-`level` thumbnail with
/// out = round(alpha * color + (1 - alpha) * thumbnail). Pixels outside all
/// cells keep the thumbnail. Cells must share one level no coarser than the
/// thumbnail level.
RgbImage render_heatmap(std::span<const HeatmapCell> cells, const SlidePyramid& pyramid, int level,
                        HeatmapMode mode, double alpha = kDefaultHeatmapAlpha);

/// Same, over an already-read thumbnail of the given level.
RgbImage render_heatmap(std::span<const HeatmapCell> cells, const RgbImage& thumbnail,
                        int thumbnail_level, HeatmapMode mode, double alpha = kDefaultHeatmapAlpha);

struct TriageStats {
  std::size_t triaged_patch_count = 0;
  double trigger_rate = 0.0;

  friend bool operator==(const TriageStats&, const TriageStats&) = default;
};

struct ReportProvenance {
  /// Task name to model version digest.
  std::map<std::string, std::string> model_versions;
  std::string config_digest;
  std::string engine_version = RCCPATH_VERSION;
  std::string timestamp;
  std::uint64_t seed = 0;

  friend bool operator==(const ReportProvenance&, const ReportProvenance&) = default;
};

struct GroundTruthComparison {
  std::optional<std::string> subtype_reference;
  std::optional<std::string> subtype_predicted;
  std::optional<int> grade_reference;
  std::optional<int> grade_predicted;

  std::optional<bool> subtype_match() const;
  std::optional<bool> grade_match() const;
  friend bool operator==(const GroundTruthComparison&, const GroundTruthComparison&) = default;
};

struct CaseReport {
  int schema_version = kReportSchemaVersion;
  std::string case_id;
  std::string slide_id;
  std::vector<std::string> review_flags;
  SlideMetrics metrics;
  TriageStats triage;
  std::optional<SubtypeSummary> subtype;
  std::optional<GradeSummary> grade;
  /// Artifact name to path relative to the slide output directory.
  std::map<std::string, std::string> artifacts;
  ReportProvenance provenance;
  std::optional<GroundTruthComparison> ground_truth_comparison;

  friend bool operator==(const CaseReport&, const CaseReport&) = default;
};

struct ReportInputs {
  std::string case_id;
  std::string slide_id;
  SlideMetrics metrics;
  TriageStats triage;
  std::optional<SubtypeSummary> subtype;
  std::optional<GradeSummary> grade;
  std::map<std::string, std::string> artifacts;
  /// Directory the artifact paths are relative to; checked for existence
  /// unless empty.
  std::filesystem::path artifact_root;
  ReportProvenance provenance;
  GroundTruth ground_truth;
  std::vector<std::string> review_flags;
};

/// Assembles and cross-checks a report. Violations raise ReportInconsistent
/// naming the failed constraint. A zero-tissue slide is flagged for review.
CaseReport build_case_report(const ReportInputs& inputs);

/// Re-runs the consistency checks on an assembled report.
void check_report(const CaseReport& report, const std::filesystem::path& artifact_root = {});

enum class ReportFormat { kJson, kText };

/// JSON: sorted keys, shortest round-trip floats, trailing newline.
/// Text: fixed template with areas to 3 decimals and percentages to 1.
std::string serialize_report(const CaseReport& report, ReportFormat format);

/// Inverse of the JSON form. Malformed input is InvalidInput.
CaseReport parse_report_json(const std::string& text);

/// Writes report.json and report.txt into dir after checking artifacts.
void write_report_files(const CaseReport& report, const std::filesystem::path& dir);

}  // namespace rccpath

#endif  // RCCPATH_RENDER_REPORT_H_
