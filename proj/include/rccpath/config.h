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

// Pipeline configuration and case manifests.
//
// A config file is TOML (or JSON with the same structure). Every section
// and key is optional except paths.tumor_model; unknown keys are rejected.
// Relative paths resolve against the directory holding the config file.

#ifndef RCCPATH_CONFIG_H_
#define RCCPATH_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rccpath/diagnosis.h"
#include "rccpath/slide_store.h"
#include "rccpath/stain_norm.h"
#include "rccpath/triage.h"

namespace rccpath {

struct PathsConfig {
  /// Cache of ingested pyramids, keyed by content digest.
  std::filesystem::path store = "pyramids";
  std::filesystem::path output = "out";
  /// Reference stain profile JSON; needed only by Macenko-input classifiers.
  std::filesystem::path stain_reference;
  std::filesystem::path tumor_model;
  std::filesystem::path tumor_magnified_model;
  std::filesystem::path subtype_model;
  std::filesystem::path g4_model;
  std::filesystem::path grade_model;
};

struct DetectionConfig {
  int patch_size = 512;
  double magnification = 20.0;
  double tissue_od_threshold = kDefaultTissueOdThreshold;
  int mask_stride = kDefaultMaskStride;
  double min_tissue_fraction = kDefaultMinTissueFraction;
};

struct RegionConfig {
  int patch_size = 1000;
  double magnification = 20.0;
  double min_tumor_overlap = kDefaultMinTumorOverlap;
};

struct GradeConfig {
  RegionConfig region;
  double g4_threshold = kDefaultG4Threshold;
  double g4_override = kDefaultG4Override;
};

struct RenderConfig {
  double alpha = 0.4;
  int thumbnail_max_dim = 2048;
  bool heatmaps = true;
};

struct RunConfig {
  int workers = 1;
  std::uint64_t seed = 0;
  /// Written into report provenance so reports are reproducible.
  std::string report_timestamp = "1970-01-01T00:00:00Z";
  int tile_size = kDefaultTileSize;
  bool patch_records = true;
};

struct PipelineConfig {
  /// Directory relative paths were resolved against.
  std::filesystem::path base_dir;
  PathsConfig paths;
  DetectionConfig detection;
  RegionConfig subtype;
  GradeConfig grade;
  TriageConfig triage;
  MacenkoParams stain;
  RenderConfig render;
  RunConfig run;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// SHA-256 of the canonical JSON of every setting except paths.
  std::string digest() const;
};

/// Parses TOML or JSON text (chosen by `format_hint`, "toml" or "json"),
/// applies defaults and validates. `origin` is used in messages.
PipelineConfig parse_config(const std::string& text, const std::string& format_hint,
                            const std::filesystem::path& base_dir, const std::string& origin = "<config>");

/// Format by extension: .json is JSON, anything else TOML.
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of a config (sorted keys), paths included.
std::string config_to_json(const PipelineConfig& config);

struct SlideEntry {
  std::string slide_id;
  /// Base image (PNG/PPM) or an already ingested pyramid directory.
  std::filesystem::path image;
  std::optional<double> mpp;
  std::optional<double> magnification;
};

struct CaseManifest {
  std::string case_id;
  std::string source;
  GroundTruth labels;
  std::vector<SlideEntry> slides;

  void validate() const;
};

/// Accepts one case object or {"cases": [...]}. Relative slide paths
/// resolve against the manifest's directory. Errors are ConfigError.
std::vector<CaseManifest> parse_manifests(const std::string& json_text,
                                          const std::filesystem::path& base_dir,
                                          const std::string& origin = "<manifest>");
std::vector<CaseManifest> load_manifests(const std::filesystem::path& path);

}  // namespace rccpath

#endif  // RCCPATH_CONFIG_H_
