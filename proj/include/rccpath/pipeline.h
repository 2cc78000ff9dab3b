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

// End-to-end orchestration: ingest (or reuse a cached pyramid), mask,
// detect with triage, subtype and grade the tumor region, render heatmaps
// and write the whole-case report for every slide of every case.

#ifndef RCCPATH_PIPELINE_H_
#define RCCPATH_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rccpath/config.h"
#include "rccpath/diagnosis.h"
#include "rccpath/error.h"
#include "rccpath/inference.h"
#include "rccpath/render_report.h"
#include "rccpath/slide_store.h"

namespace rccpath {

struct ModelSet {
  ClassifierHandle tumor;
  ClassifierHandle tumor_magnified;
  ClassifierHandle subtype;
  ClassifierHandle g4;
  ClassifierHandle grade;
  std::optional<StainProfile> stain_reference;

  /// Task name to version digest for every loaded model.
  std::map<std::string, std::string> versions() const;
};

/// Loads every classifier named in the config and checks its task.
ModelSet load_models(const PipelineConfig& config);

/// Everything computed for one slide before anything is written.
struct SlideAnalysis {
  int detection_level = 0;
  std::vector<PatchCoordinate> grid;
  TumorMap tumor_map;
  SlideMetrics metrics;
  std::optional<SubtypeSummary> subtype;
  std::vector<SubtypeRecord> subtype_records;
  std::optional<GradeSummary> grade;
  std::vector<GradeRecord> grade_records;
  std::vector<std::string> review_flags;
  std::map<std::string, double> timings_s;
};

/// Runs detection and, when the models are configured, subtype and grade.
/// Zero tissue and tumor-free slides produce flags, not errors.
SlideAnalysis analyze_slide(const SlidePyramid& pyramid, const PipelineConfig& config,
                            const ModelSet& models, int workers);

/// One JSON line per detection, subtype and grade record.
std::string patch_records_jsonl(const SlideAnalysis& analysis);

struct RunOptions {
  bool force_ingest = false;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
};

struct SlideRunResult {
  std::string case_id;
  std::string slide_id;
  bool ok = false;
  std::optional<ErrorCode> error_code;
  std::string error_message;
  /// "hit", "miss" or "direct" (pyramid directory given in the manifest).
  std::string cache;
  std::size_t grid_patch_count = 0;
  std::size_t tumor_patch_count = 0;
  std::size_t triaged_patch_count = 0;
  double trigger_rate = 0.0;
  std::vector<std::string> review_flags;
  std::filesystem::path output_dir;
  std::map<std::string, double> timings_s;
  std::optional<CaseReport> report;
};

struct RunResult {
  std::vector<SlideRunResult> slides;
  std::filesystem::path summary_path;

  std::size_t failed_count() const;
  std::vector<CaseReport> reports() const;
  /// 0 when every slide succeeded, 1 otherwise.
  int exit_code() const { return failed_count() == 0 ? 0 : 1; }
};

/// Cache key of a slide image: digest of its bytes and ingest parameters.
std::string ingest_cache_key(const std::filesystem::path& image, double mpp, double magnification,
                             int tile_size);

/// Opens a pyramid for a manifest slide, ingesting into the store on a miss.
SlidePyramid open_slide(const SlideEntry& slide, const CaseManifest& manifest,
                        const PipelineConfig& config, bool force_ingest, std::string* cache_state);

/// Processes every slide; a failing slide is recorded and the run goes on.
/// Writes <out>/<case>/<slide>/... and <out>/run_summary.json.
RunResult run_pipeline(const PipelineConfig& config, const std::vector<CaseManifest>& manifests,
                       const RunOptions& options = {});

/// Same, with models already loaded.
RunResult run_pipeline(const PipelineConfig& config, const std::vector<CaseManifest>& manifests,
                       const ModelSet& models, const RunOptions& options = {});

}  // namespace rccpath

#endif  // RCCPATH_PIPELINE_H_
