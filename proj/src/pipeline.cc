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

// GCC 11 reports a spurious maybe-uninitialized on copies of
// std::optional<StainProfile> (GCC bug 80635).
#pragma GCC diagnostic ignored "-Wmaybe-uninitialized"

#include "rccpath/pipeline.h"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>

#include "json.hpp"
#include "rccpath/image_io.h"
#include "rccpath/triage.h"

namespace rccpath {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string utc_now_iso() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json coord_json(const PatchCoordinate& c) {
  return {{"level", c.level}, {"x", c.x}, {"y", c.y}, {"size", c.size}};
}

ClassifierHandle load_optional(const fs::path& path, Task task) {
  return path.empty() ? nullptr : load_classifier(path, task);
}

int level_for(const SlidePyramid& pyramid, double magnification, const char* what) {
  const auto level = pyramid.level_for_magnification(magnification);
  if (!level) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", magnification);
    fail(ErrorCode::kInvalidInput, std::string("slide has no pyramid level at ") + buf + "x for " + what);
  }
  return *level;
}

void flag_mpp_mismatch(const Classifier& c, double mpp, std::vector<std::string>& flags) {
  if (std::fabs(c.info().expected_mpp - mpp) > 1e-6 * mpp) {
    flags.push_back(std::string(task_name(c.task())) + "_mpp_mismatch");
  }
}

RegionTaskContext region_context(const SlidePyramid& pyramid, const RegionConfig& rc,
                                 const PatchPreparation& prep, int workers, const char* what) {
  RegionTaskContext ctx;
  ctx.level = level_for(pyramid, rc.magnification, what);
  ctx.patch_size = rc.patch_size;
  ctx.min_tumor_overlap = rc.min_tumor_overlap;
  ctx.preparation = prep;
  ctx.workers = workers;
  return ctx;
}

}  // namespace

std::map<std::string, std::string> ModelSet::versions() const {
  std::map<std::string, std::string> out;
  if (tumor) out["tumor2"] = tumor->info().version;
  if (tumor_magnified) out["tumor2_magnified"] = tumor_magnified->info().version;
  if (subtype) out["subtype3"] = subtype->info().version;
  if (g4) out["g4_binary"] = g4->info().version;
  if (grade) out["grade3"] = grade->info().version;
  return out;
}

ModelSet load_models(const PipelineConfig& config) {
  ModelSet m;
  m.tumor = load_classifier(config.paths.tumor_model, Task::kTumor2);
  m.tumor_magnified = load_optional(config.paths.tumor_magnified_model, Task::kTumor2);
  m.subtype = load_optional(config.paths.subtype_model, Task::kSubtype3);
  m.g4 = load_optional(config.paths.g4_model, Task::kG4Binary);
  m.grade = load_optional(config.paths.grade_model, Task::kGrade3);
  if (!config.paths.stain_reference.empty()) {
    m.stain_reference = stain_profile_from_json(read_text_file(config.paths.stain_reference));
  }
  return m;
}

SlideAnalysis analyze_slide(const SlidePyramid& pyramid, const PipelineConfig& config,
                            const ModelSet& models, int workers) {
  require(models.tumor != nullptr, ErrorCode::kInvalidInput, "no tumor classifier loaded");
  SlideAnalysis a;
  const PatchPreparation prep(models.stain_reference, config.stain);

  auto t0 = Clock::now();
  a.detection_level = level_for(pyramid, config.detection.magnification, "detection");
  const double det_mpp = pyramid.mpp_at(a.detection_level);
  const BinaryMask mask = tissue_mask(pyramid, a.detection_level, config.detection.tissue_od_threshold,
                                      config.detection.mask_stride);
  a.grid = grid_patches(pyramid, det_mpp, config.detection.patch_size, mask,
                        config.detection.min_tissue_fraction);
  a.timings_s["mask"] = seconds_since(t0);

  a.tumor_map.level = a.detection_level;
  a.tumor_map.patch_size = config.detection.patch_size;
  a.tumor_map.mpp = det_mpp;
  if (a.grid.empty()) {
    a.metrics = slide_metrics(a.tumor_map, det_mpp, config.detection.patch_size, &mask);
    a.review_flags.push_back("zero_tissue");
    return a;
  }

  t0 = Clock::now();
  flag_mpp_mismatch(*models.tumor, det_mpp, a.review_flags);
  DetectionContext dctx;
  dctx.tumor = models.tumor;
  dctx.magnified = models.tumor_magnified;
  dctx.preparation = prep;
  dctx.triage = config.triage;
  dctx.workers = workers;
  a.tumor_map = detect_tumor(pyramid, a.grid, dctx);
  a.metrics = slide_metrics(a.tumor_map, det_mpp, config.detection.patch_size, &mask);
  a.timings_s["detect"] = seconds_since(t0);
  for (const auto& r : a.tumor_map.records) {
    if (r.stain_pass_through) {
      a.review_flags.push_back("stain_pass_through");
      break;
    }
  }
  for (const auto& r : a.tumor_map.records) {
    if (r.triage && !r.triage->unavailable.empty()) {
      a.review_flags.push_back("triage_strategy_unavailable");
      break;
    }
  }

  if (a.tumor_map.tumor_count() == 0) {
    a.review_flags.push_back("no_tumor_detected");
    return a;
  }

  if (models.subtype) {
    t0 = Clock::now();
    const auto ctx = region_context(pyramid, config.subtype, prep, workers, "subtyping");
    flag_mpp_mismatch(*models.subtype, pyramid.mpp_at(ctx.level), a.review_flags);
    const auto coords = tumor_region_grid(pyramid, a.tumor_map, ctx.level, ctx.patch_size, ctx.min_tumor_overlap);
    if (coords.empty()) {
      a.review_flags.push_back("subtype_region_empty");
    } else {
      a.subtype_records = predict_subtypes(pyramid, coords, *models.subtype, ctx);
      a.subtype = aggregate_subtypes(a.subtype_records, patch_area_mm2(ctx.patch_size, pyramid.mpp_at(ctx.level)));
    }
    a.timings_s["subtype"] = seconds_since(t0);
  }

  if (models.g4 && models.grade) {
    t0 = Clock::now();
    const auto ctx = region_context(pyramid, config.grade.region, prep, workers, "grading");
    flag_mpp_mismatch(*models.g4, pyramid.mpp_at(ctx.level), a.review_flags);
    flag_mpp_mismatch(*models.grade, pyramid.mpp_at(ctx.level), a.review_flags);
    const auto coords = tumor_region_grid(pyramid, a.tumor_map, ctx.level, ctx.patch_size, ctx.min_tumor_overlap);
    if (coords.empty()) {
      a.review_flags.push_back("grade_region_empty");
    } else {
      a.grade_records = grade_patches(pyramid, coords, *models.g4, *models.grade, ctx, config.grade.g4_threshold);
      a.grade = aggregate_grade(a.grade_records, config.grade.g4_override);
    }
    a.timings_s["grade"] = seconds_since(t0);
  }
  return a;
}

std::string patch_records_jsonl(const SlideAnalysis& a) {
  std::string out;
  for (const auto& r : a.tumor_map.records) {
    json j = {{"task", "tumor2"},
              {"coord", coord_json(r.coord)},
              {"p_tumor", r.p_tumor},
              {"is_tumor", r.is_tumor},
              {"triaged", r.triaged},
              {"provenance", provenance_name(r.provenance)},
              {"stain_pass_through", r.stain_pass_through}};
    out += j.dump() + "\n";
  }
  const auto& subtype_labels = LabelSchema::for_task(Task::kSubtype3).labels;
  for (const auto& r : a.subtype_records) {
    json j = {{"task", "subtype3"},
              {"coord", coord_json(r.coord)},
              {"probs", r.probs},
              {"label", subtype_labels.at(r.label)}};
    out += j.dump() + "\n";
  }
  for (const auto& r : a.grade_records) {
    json j = {{"task", "grade"},
              {"coord", coord_json(r.coord)},
              {"p_g4", r.p_g4},
              {"is_g4", r.is_g4},
              {"g123", r.g123 ? json(*r.g123) : json(nullptr)}};
    out += j.dump() + "\n";
  }
  return out;
}

std::size_t RunResult::failed_count() const {
  std::size_t n = 0;
  for (const auto& s : slides) n += s.ok ? 0 : 1;
  return n;
}

std::vector<CaseReport> RunResult::reports() const {
  std::vector<CaseReport> out;
  for (const auto& s : slides) {
    if (s.report) out.push_back(*s.report);
  }
  return out;
}

std::string ingest_cache_key(const fs::path& image, double mpp, double magnification, int tile_size) {
  const std::string content = sha256_hex(read_file_bytes(image));
  char params[96];
  std::snprintf(params, sizeof params, "|%.17g|%.17g|%d", mpp, magnification, tile_size);
  return sha256_hex(content + params);
}

SlidePyramid open_slide(const SlideEntry& slide, const CaseManifest& manifest, const PipelineConfig& config,
                        bool force_ingest, std::string* cache_state) {
  require(fs::exists(slide.image), ErrorCode::kNotFound, "slide image " + slide.image.string() + " not found");
  if (fs::is_directory(slide.image)) {
    if (cache_state) *cache_state = "direct";
    SlidePyramid pyramid = load_pyramid(slide.image);
    if (slide.mpp) {
      require(std::fabs(*slide.mpp - pyramid.mpp_base()) <= 1e-9 * pyramid.mpp_base(), ErrorCode::kInvalidInput,
              "manifest mpp disagrees with pyramid " + slide.image.string());
    }
    return pyramid;
  }

  IngestOptions opts;
  opts.slide_id = slide.slide_id;
  opts.case_id = manifest.case_id;
  opts.mpp_base = slide.mpp.value_or(0.25);
  opts.magnification_base = slide.magnification.value_or(40.0);
  opts.tile_size = config.run.tile_size;
  opts.ground_truth = manifest.labels;

  const fs::path dir =
      config.paths.store / ingest_cache_key(slide.image, opts.mpp_base, opts.magnification_base, opts.tile_size);
  if (!force_ingest && fs::exists(dir / "manifest.json")) {
    if (cache_state) *cache_state = "hit";
    return load_pyramid(dir);
  }
  if (cache_state) *cache_state = "miss";
  SlidePyramid pyramid = ingest_base_image(read_image(slide.image), opts);
  const fs::path tmp = dir.string() + ".tmp" + std::to_string(::getpid());
  fs::remove_all(tmp);
  save_pyramid(pyramid, tmp);
  fs::remove_all(dir);
  fs::rename(tmp, dir);
  return pyramid;
}

namespace {

SlideRunResult process_slide(const PipelineConfig& config, const CaseManifest& manifest, const SlideEntry& slide,
                             const ModelSet& models, const RunOptions& options, const fs::path& out_root,
                             int workers, std::uint64_t seed) {
  SlideRunResult res;
  res.case_id = manifest.case_id;
  res.slide_id = slide.slide_id;
  res.output_dir = out_root / manifest.case_id / slide.slide_id;
  try {
    auto t0 = Clock::now();
    const SlidePyramid pyramid = open_slide(slide, manifest, config, options.force_ingest, &res.cache);
    res.timings_s["ingest"] = seconds_since(t0);

    SlideAnalysis a = analyze_slide(pyramid, config, models, workers);
    for (const auto& [k, v] : a.timings_s) res.timings_s[k] = v;
    res.grid_patch_count = a.grid.size();
    res.tumor_patch_count = a.tumor_map.tumor_count();
    res.triaged_patch_count = a.tumor_map.triaged_count();
    res.trigger_rate = a.tumor_map.trigger_rate();

    t0 = Clock::now();
    fs::create_directories(res.output_dir);
    std::map<std::string, std::string> artifacts;
    int min_level = a.detection_level;
    if (!a.subtype_records.empty()) min_level = std::max(min_level, a.subtype_records.front().coord.level);
    if (!a.grade_records.empty()) min_level = std::max(min_level, a.grade_records.front().coord.level);
    const int thumb_level = thumbnail_level(pyramid, config.render.thumbnail_max_dim, min_level);
    const RgbImage thumbnail = read_level(pyramid, thumb_level);
    write_png(res.output_dir / "thumbnail.png", thumbnail);
    artifacts["thumbnail"] = "thumbnail.png";
    if (config.render.heatmaps) {
      std::vector<HeatmapCell> cells;
      for (const auto& r : a.tumor_map.records) cells.push_back({r.coord, r.p_tumor});
      write_png(res.output_dir / "tumor_heatmap.png",
                render_heatmap(cells, thumbnail, thumb_level, HeatmapMode::kProbability, config.render.alpha));
      artifacts["tumor_heatmap"] = "tumor_heatmap.png";
      if (!a.subtype_records.empty()) {
        cells.clear();
        for (const auto& r : a.subtype_records) cells.push_back({r.coord, static_cast<double>(r.label)});
        write_png(res.output_dir / "subtype_heatmap.png",
                  render_heatmap(cells, thumbnail, thumb_level, HeatmapMode::kLabel, config.render.alpha));
        artifacts["subtype_heatmap"] = "subtype_heatmap.png";
      }
      if (!a.grade_records.empty()) {
        cells.clear();
        for (const auto& r : a.grade_records) {
          const double label = r.is_g4 ? 3.0 : static_cast<double>(argmax_index(*r.g123));
          cells.push_back({r.coord, label});
        }
        write_png(res.output_dir / "grade_heatmap.png",
                  render_heatmap(cells, thumbnail, thumb_level, HeatmapMode::kLabel, config.render.alpha));
        artifacts["grade_heatmap"] = "grade_heatmap.png";
      }
    }
    if (config.run.patch_records) {
      write_text_file(res.output_dir / "patches.jsonl", patch_records_jsonl(a));
      artifacts["patch_records"] = "patches.jsonl";
      std::string audit;
      for (const auto& r : a.tumor_map.records) {
        if (r.triage) audit += triage_audit_json(r.coord, r.p_tumor, *r.triage) + "\n";
      }
      write_text_file(res.output_dir / "triage_audit.jsonl", audit);
      artifacts["triage_audit"] = "triage_audit.jsonl";
    }
    res.timings_s["render"] = seconds_since(t0);

    t0 = Clock::now();
    ReportInputs in;
    in.case_id = manifest.case_id;
    in.slide_id = slide.slide_id;
    in.metrics = a.metrics;
    in.triage = {a.tumor_map.triaged_count(), a.tumor_map.trigger_rate()};
    in.subtype = a.subtype;
    in.grade = a.grade;
    in.artifacts = artifacts;
    in.artifact_root = res.output_dir;
    in.provenance.model_versions = models.versions();
    in.provenance.config_digest = config.digest();
    in.provenance.timestamp = config.run.report_timestamp;
    in.provenance.seed = seed;
    in.ground_truth = manifest.labels;
    in.review_flags = a.review_flags;
    CaseReport report = build_case_report(in);
    write_report_files(report, res.output_dir);
    res.timings_s["report"] = seconds_since(t0);
    res.review_flags = report.review_flags;
    res.report = std::move(report);
    res.ok = true;
  } catch (const Error& e) {
    res.error_code = e.code();
    res.error_message = e.detail();
  } catch (const std::exception& e) {
    res.error_code = ErrorCode::kIoError;
    res.error_message = e.what();
  }
  return res;
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& config, const std::vector<CaseManifest>& manifests,
                       const RunOptions& options) {
  return run_pipeline(config, manifests, load_models(config), options);
}

RunResult run_pipeline(const PipelineConfig& config, const std::vector<CaseManifest>& manifests,
                       const ModelSet& models, const RunOptions& options) {
  config.validate();
  for (const auto& m : manifests) m.validate();
  const int workers = options.workers.value_or(config.run.workers);
  require(workers >= 1, ErrorCode::kConfigError, "workers must be at least 1");
  const std::uint64_t seed = options.seed.value_or(config.run.seed);
  const fs::path out_root = options.output.value_or(config.paths.output);
  fs::create_directories(out_root);

  const std::string started = utc_now_iso();
  const auto t0 = Clock::now();
  RunResult result;
  for (const auto& manifest : manifests) {
    for (const auto& slide : manifest.slides) {
      result.slides.push_back(process_slide(config, manifest, slide, models, options, out_root, workers, seed));
    }
  }

  json slides = json::array();
  std::size_t total_patches = 0;
  for (const auto& s : result.slides) {
    total_patches += s.grid_patch_count;
    json e = {{"case_id", s.case_id},
              {"slide_id", s.slide_id},
              {"status", s.ok ? "ok" : "failed"},
              {"cache", s.cache},
              {"grid_patch_count", s.grid_patch_count},
              {"tumor_patch_count", s.tumor_patch_count},
              {"triaged_patch_count", s.triaged_patch_count},
              {"trigger_rate", s.trigger_rate},
              {"review_flags", s.review_flags},
              {"output_dir", s.output_dir.string()},
              {"timings_s", s.timings_s}};
    e["error"] = s.error_code ? json{{"code", error_code_name(*s.error_code)}, {"message", s.error_message}}
                              : json(nullptr);
    slides.push_back(std::move(e));
  }
  json summary = {{"engine_version", RCCPATH_VERSION},
                  {"started_at", started},
                  {"finished_at", utc_now_iso()},
                  {"elapsed_s", seconds_since(t0)},
                  {"workers", workers},
                  {"seed", seed},
                  {"config_digest", config.digest()},
                  {"slides", slides},
                  {"totals",
                   {{"slides", result.slides.size()},
                    {"failed", result.failed_count()},
                    {"grid_patch_count", total_patches}}}};
  result.summary_path = out_root / "run_summary.json";
  write_text_file(result.summary_path, summary.dump(2) + "\n");
  return result;
}

}  // namespace rccpath
