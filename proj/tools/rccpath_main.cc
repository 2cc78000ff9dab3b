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

// rccpath command-line tool.
//
// Exit codes: 0 success, 1 runtime failure (for `run`: some slides failed),
// 2 configuration or usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rccpath/config.h"
#include "rccpath/diagnosis.h"
#include "rccpath/error.h"
#include "rccpath/image_io.h"
#include "rccpath/pipeline.h"
#include "rccpath/render_report.h"
#include "rccpath/slide_store.h"
#include "rccpath/stain_norm.h"

namespace fs = std::filesystem;
using namespace rccpath;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

std::vector<std::string> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

struct StageArgs {
  std::string config;
  std::string pyramid;
  std::string out;
  std::optional<int> workers;
};

void add_stage_options(CLI::App* cmd, StageArgs& a) {
  cmd->add_option("--config", a.config, "Pipeline config (TOML or JSON)")->required();
  cmd->add_option("--pyramid", a.pyramid, "Ingested pyramid directory")->required();
  cmd->add_option("--out", a.out, "Directory for patches.jsonl and the partial report");
  cmd->add_option("--workers", a.workers, "Worker threads");
}

// detect / subtype / grade: analysis up to the given stage, printed as a
// report without artifacts.
int run_stage(const StageArgs& a, int stage) {
  const PipelineConfig cfg = load_config(a.config);
  ModelSet models = load_models(cfg);
  if (stage < 1) models.subtype = nullptr;
  if (stage < 2) models.g4 = models.grade = nullptr;
  if (stage == 1 && !models.subtype) fail(ErrorCode::kConfigError, "paths.subtype_model is not set");
  if (stage == 2 && !models.g4) fail(ErrorCode::kConfigError, "paths.g4_model is not set");
  if (stage == 2) models.subtype = nullptr;

  const SlidePyramid pyramid = load_pyramid(a.pyramid);
  const SlideAnalysis an = analyze_slide(pyramid, cfg, models, a.workers.value_or(cfg.run.workers));
  ReportInputs in;
  in.case_id = pyramid.case_id();
  in.slide_id = pyramid.slide_id();
  in.metrics = an.metrics;
  in.triage = {an.tumor_map.triaged_count(), an.tumor_map.trigger_rate()};
  in.subtype = an.subtype;
  in.grade = an.grade;
  in.provenance.model_versions = models.versions();
  in.provenance.config_digest = cfg.digest();
  in.provenance.timestamp = cfg.run.report_timestamp;
  in.provenance.seed = cfg.run.seed;
  in.ground_truth = pyramid.info().ground_truth;
  in.review_flags = an.review_flags;
  const std::string json = serialize_report(build_case_report(in), ReportFormat::kJson);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text_file(fs::path(a.out) / "patches.jsonl", patch_records_jsonl(an));
    write_text_file(fs::path(a.out) / "report.json", json);
  }
  std::cout << json;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-slide renal cell carcinoma analysis engine"};
  app.set_version_flag("--version", std::string(RCCPATH_VERSION));
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Tile a base image into a pyramid directory");
  std::string ingest_image, ingest_out;
  IngestOptions ingest_opts;
  ingest->add_option("image", ingest_image, "PNG or PPM base image")->required();
  ingest->add_option("--out", ingest_out, "Output pyramid directory")->required();
  ingest->add_option("--slide-id", ingest_opts.slide_id);
  ingest->add_option("--case-id", ingest_opts.case_id);
  ingest->add_option("--mpp", ingest_opts.mpp_base, "Base resolution in micrometers per pixel");
  ingest->add_option("--magnification", ingest_opts.magnification_base);
  ingest->add_option("--tile-size", ingest_opts.tile_size);

  // stain fit
  auto* stain = app.add_subcommand("stain", "Stain profile utilities");
  stain->require_subcommand(1);
  auto* stain_fit = stain->add_subcommand("fit", "Estimate a reference stain profile from an image");
  std::string stain_image, stain_out;
  MacenkoParams stain_params;
  stain_fit->add_option("--reference", stain_image, "PNG or PPM reference image")->required();
  stain_fit->add_option("--out", stain_out, "Profile JSON path (stdout if omitted)");
  stain_fit->add_option("--beta", stain_params.beta);
  stain_fit->add_option("--alpha", stain_params.alpha);

  StageArgs detect_args, subtype_args, grade_args;
  add_stage_options(app.add_subcommand("detect", "Tumor detection with triage on one pyramid"), detect_args);
  auto* detect = app.get_subcommand("detect");
  add_stage_options(app.add_subcommand("subtype", "Detection followed by subtype aggregation"), subtype_args);
  auto* subtype = app.get_subcommand("subtype");
  add_stage_options(app.add_subcommand("grade", "Detection followed by ISUP grade aggregation"), grade_args);
  auto* grade = app.get_subcommand("grade");

  // report
  auto* report = app.add_subcommand("report", "Validate and re-render a report.json");
  std::string report_in, report_format = "text", report_out;
  report->add_option("report", report_in, "report.json")->required();
  report->add_option("--format", report_format)->check(CLI::IsMember({"text", "json"}));
  report->add_option("--out", report_out, "Output file (stdout if omitted)");

  // run
  auto* run = app.add_subcommand("run", "Full pipeline over a case manifest");
  std::string run_config, run_manifest, run_out;
  std::optional<int> run_workers;
  std::optional<std::uint64_t> run_seed;
  bool force_ingest = false;
  run->add_option("--config", run_config)->required();
  run->add_option("--manifest", run_manifest)->required();
  run->add_option("--out", run_out, "Overrides paths.output");
  run->add_option("--workers", run_workers);
  run->add_option("--seed", run_seed);
  run->add_flag("--force-ingest", force_ingest, "Re-ingest even when a cached pyramid exists");

  // kappa
  auto* kappa = app.add_subcommand("kappa", "Cohen's kappa between two label files (one label per line)");
  std::string kappa_a, kappa_b;
  kappa->add_option("rater_a", kappa_a)->required();
  kappa->add_option("rater_b", kappa_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) {
      const SlidePyramid p = ingest_base_image(read_image(ingest_image), ingest_opts);
      save_pyramid(p, ingest_out);
      std::printf("%s: %d levels, %dx%d base\n", ingest_out.c_str(), p.level_count(), p.level(0).width,
                  p.level(0).height);
      return kExitOk;
    }
    if (*stain_fit) {
      const std::string json = stain_profile_to_json(estimate_stain_profile(read_image(stain_image), stain_params));
      if (stain_out.empty()) {
        std::cout << json << "\n";
      } else {
        write_text_file(stain_out, json + "\n");
      }
      return kExitOk;
    }
    if (*detect) return run_stage(detect_args, 0);
    if (*subtype) return run_stage(subtype_args, 1);
    if (*grade) return run_stage(grade_args, 2);
    if (*report) {
      const CaseReport r = parse_report_json(read_text_file(report_in));
      check_report(r);
      const std::string text =
          serialize_report(r, report_format == "json" ? ReportFormat::kJson : ReportFormat::kText);
      if (report_out.empty()) {
        std::cout << text;
      } else {
        write_text_file(report_out, text);
      }
      return kExitOk;
    }
    if (*run) {
      const PipelineConfig cfg = load_config(run_config);
      const auto manifests = load_manifests(run_manifest);
      RunOptions opts;
      opts.force_ingest = force_ingest;
      opts.workers = run_workers;
      opts.seed = run_seed;
      if (!run_out.empty()) opts.output = fs::absolute(run_out);
      ModelSet models;
      try {
        models = load_models(cfg);
      } catch (const Error& e) {
        std::fprintf(stderr, "rccpath: cannot load models: %s\n", e.what());
        return kExitUsage;
      }
      const RunResult result = run_pipeline(cfg, manifests, models, opts);
      for (const auto& s : result.slides) {
        if (s.ok) {
          std::printf("%s/%s: ok, %zu patches, %zu tumor, trigger rate %.4f\n", s.case_id.c_str(),
                      s.slide_id.c_str(), s.grid_patch_count, s.tumor_patch_count, s.trigger_rate);
        } else {
          std::printf("%s/%s: FAILED %s: %s\n", s.case_id.c_str(), s.slide_id.c_str(),
                      std::string(error_code_name(*s.error_code)).c_str(), s.error_message.c_str());
        }
      }
      std::printf("summary: %s\n", result.summary_path.c_str());
      return result.exit_code() == 0 ? kExitOk : kExitFailed;
    }
    if (*kappa) {
      const auto a = read_labels(kappa_a);
      const auto b = read_labels(kappa_b);
      std::printf("%.6f\n", cohens_kappa(a, b));
      return kExitOk;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "rccpath: %s\n", e.what());
    return e.code() == ErrorCode::kConfigError ? kExitUsage : kExitFailed;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rccpath: %s\n", e.what());
    return kExitFailed;
  }
  return kExitUsage;
}
