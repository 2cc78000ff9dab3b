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

#include "rccpath/render_report.h"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>

#include "json.hpp"
#include "rccpath/error.h"
#include "rccpath/image_io.h"

namespace rccpath {

using nlohmann::json;

namespace {

// Okabe-Ito colors, distinguishable under common color-vision deficiencies.
constexpr std::array<std::array<std::uint8_t, 3>, kLabelPaletteSize> kPalette{{
    {230, 159, 0},
    {86, 180, 233},
    {0, 158, 115},
    {240, 228, 66},
    {0, 114, 178},
    {213, 94, 0},
    {204, 121, 167},
    {0, 0, 0},
}};

std::uint8_t blend(double alpha, std::uint8_t color, std::uint8_t base) {
  return static_cast<std::uint8_t>(std::lround(alpha * color + (1.0 - alpha) * base));
}

std::string printf_string(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buf[512];
  const int n = std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return std::string(buf, static_cast<std::size_t>(std::clamp(n, 0, static_cast<int>(sizeof buf) - 1)));
}

[[noreturn]] void inconsistent(const std::string& what) { fail(ErrorCode::kReportInconsistent, what); }

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b)); }

}  // namespace

std::array<std::uint8_t, 3> probability_color(double p) {
  require(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorCode::kInvalidInput,
          "heatmap probability outside [0, 1]");
  return {static_cast<std::uint8_t>(std::lround(255.0 * p)), 0,
          static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - p)))};
}

std::array<std::uint8_t, 3> label_color(std::size_t label) {
  require(label < kPalette.size(), ErrorCode::kInvalidInput, "label index beyond heatmap palette");
  return kPalette[label];
}

int thumbnail_level(const SlidePyramid& pyramid, int max_dim, int min_level) {
  require(pyramid.has_level(min_level), ErrorCode::kInvalidInput, "thumbnail min level out of range");
  for (int l = min_level; l < pyramid.level_count(); ++l) {
    const Level& lv = pyramid.level(l);
    if (std::max(lv.width, lv.height) <= max_dim) return l;
  }
  return pyramid.level_count() - 1;
}

RgbImage render_heatmap(std::span<const HeatmapCell> cells, const RgbImage& thumbnail,
                        int thumb_level, HeatmapMode mode, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::kInvalidInput, "alpha must be in [0, 1]");
  RgbImage out = thumbnail;
  if (cells.empty()) return out;
  const int grid_level = cells.front().coord.level;
  require(grid_level <= thumb_level, ErrorCode::kInvalidInput,
          "heatmap grid is coarser than the thumbnail level");
  require(thumb_level - grid_level < 62, ErrorCode::kInvalidInput, "level gap too large");
  const std::int64_t scale = std::int64_t{1} << (thumb_level - grid_level);
  auto floor_div = [](std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };

  for (const HeatmapCell& cell : cells) {
    require(cell.coord.level == grid_level, ErrorCode::kInvalidInput,
            "heatmap cells span several levels");
    require(cell.coord.size > 0, ErrorCode::kInvalidInput, "heatmap cell has no area");
    std::array<std::uint8_t, 3> color;
    if (mode == HeatmapMode::kProbability) {
      color = probability_color(cell.value);
    } else {
      require(cell.value >= 0.0 && cell.value == std::floor(cell.value), ErrorCode::kInvalidInput,
              "label heatmap values must be non-negative integers");
      color = label_color(static_cast<std::size_t>(cell.value));
    }
    const std::int64_t x0 = std::max<std::int64_t>(0, floor_div(cell.coord.x, scale));
    const std::int64_t y0 = std::max<std::int64_t>(0, floor_div(cell.coord.y, scale));
    const std::int64_t x1 =
        std::min<std::int64_t>(out.width, -floor_div(-(cell.coord.x + cell.coord.size), scale));
    const std::int64_t y1 =
        std::min<std::int64_t>(out.height, -floor_div(-(cell.coord.y + cell.coord.size), scale));
    for (std::int64_t y = y0; y < y1; ++y) {
      for (std::int64_t x = x0; x < x1; ++x) {
        std::uint8_t* px = out.at(static_cast<int>(x), static_cast<int>(y));
        const std::uint8_t* base = thumbnail.at(static_cast<int>(x), static_cast<int>(y));
        for (int c = 0; c < 3; ++c) px[c] = blend(alpha, color[c], base[c]);
      }
    }
  }
  return out;
}

RgbImage render_heatmap(std::span<const HeatmapCell> cells, const SlidePyramid& pyramid, int level,
                        HeatmapMode mode, double alpha) {
  require(pyramid.has_level(level), ErrorCode::kInvalidInput, "thumbnail level out of range");
  return render_heatmap(cells, read_level(pyramid, level), level, mode, alpha);
}

// ---- report -----------------------------------------------------------------

std::optional<bool> GroundTruthComparison::subtype_match() const {
  if (!subtype_reference || !subtype_predicted) return std::nullopt;
  return *subtype_reference == *subtype_predicted;
}

std::optional<bool> GroundTruthComparison::grade_match() const {
  if (!grade_reference || !grade_predicted) return std::nullopt;
  return *grade_reference == *grade_predicted;
}

void check_report(const CaseReport& r, const std::filesystem::path& artifact_root) {
  if (r.schema_version != kReportSchemaVersion) inconsistent("unsupported schema_version");
  if (r.case_id.empty() || r.slide_id.empty()) inconsistent("case and slide ids must be non-empty");

  const SlideMetrics& m = r.metrics;
  for (double v : {m.tissue_area_mm2, m.tumor_area_mm2, m.tumor_fraction, m.patch_area_mm2}) {
    if (!std::isfinite(v) || v < 0.0) inconsistent("metrics must be finite and non-negative");
  }
  if (m.tumor_patch_count > m.tissue_patch_count) {
    inconsistent(printf_string("tumor patch count %zu exceeds tissue patch count %zu",
                               m.tumor_patch_count, m.tissue_patch_count));
  }
  if (m.tumor_area_mm2 > m.tissue_area_mm2) inconsistent("tumor_area exceeds tissue_area");
  if (!close(m.tissue_area_mm2, static_cast<double>(m.tissue_patch_count) * m.patch_area_mm2, 1e-12) ||
      !close(m.tumor_area_mm2, static_cast<double>(m.tumor_patch_count) * m.patch_area_mm2, 1e-12)) {
    inconsistent("areas disagree with patch counts times patch area");
  }
  const double fraction = m.tissue_patch_count == 0
                              ? 0.0
                              : static_cast<double>(m.tumor_patch_count) /
                                    static_cast<double>(m.tissue_patch_count);
  if (!close(m.tumor_fraction, fraction, 1e-12)) inconsistent("tumor_fraction != tumor_area / tissue_area");

  if (r.triage.triaged_patch_count > m.tissue_patch_count) {
    inconsistent("triaged patch count exceeds tissue patch count");
  }
  const double rate = m.tissue_patch_count == 0
                          ? 0.0
                          : static_cast<double>(r.triage.triaged_patch_count) /
                                static_cast<double>(m.tissue_patch_count);
  if (!close(r.triage.trigger_rate, rate, 1e-12)) inconsistent("trigger_rate disagrees with counts");

  if (r.subtype) {
    const SubtypeSummary& s = *r.subtype;
    if (m.tumor_patch_count == 0) inconsistent("subtype summary present on a slide without tumor");
    std::size_t count_sum = 0;
    double proportion_sum = 0.0;
    for (const auto& st : s.per_label) {
      count_sum += st.patch_count;
      proportion_sum += st.proportion;
      if (st.proportion < 0.0 || st.proportion > 1.0) inconsistent("subtype proportion outside [0, 1]");
      if (!close(st.area_mm2, static_cast<double>(st.patch_count) * s.patch_area_mm2, 1e-12)) {
        inconsistent("subtype area disagrees with its patch count");
      }
    }
    if (count_sum != s.tumor_patch_count) {
      inconsistent(printf_string("subtype counts sum to %zu but the tumor patch total is %zu",
                                 count_sum, s.tumor_patch_count));
    }
    if (std::fabs(proportion_sum - 1.0) > 1e-9) inconsistent("subtype proportions do not sum to 1");
    if (s.slide_label >= s.per_label.size()) inconsistent("subtype slide label out of range");
  }

  if (r.grade) {
    const GradeSummary& g = *r.grade;
    if (m.tumor_patch_count == 0) inconsistent("grade summary present on a slide without tumor");
    if (g.patch_count == 0 || g.g4_count > g.patch_count) inconsistent("grade patch counts invalid");
    if (!close(g.g4_fraction, static_cast<double>(g.g4_count) / static_cast<double>(g.patch_count), 1e-12)) {
      inconsistent("g4_fraction disagrees with counts");
    }
    double sum = 0.0;
    for (double v : g.grade_percentages) {
      if (v < 0.0 || v > 1.0) inconsistent("grade percentage outside [0, 1]");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9) inconsistent("grade percentages do not sum to 1");
    if (g.slide_grade < 1 || g.slide_grade > 4) inconsistent("slide grade outside 1-4");
  }

  if (r.ground_truth_comparison) {
    const auto& gt = *r.ground_truth_comparison;
    if (gt.subtype_reference) {
      const auto& labels = LabelSchema::for_task(Task::kSubtype3).labels;
      if (std::find(labels.begin(), labels.end(), *gt.subtype_reference) == labels.end()) {
        inconsistent("ground-truth subtype '" + *gt.subtype_reference + "' is not a known label");
      }
    }
    if (gt.grade_reference && (*gt.grade_reference < 1 || *gt.grade_reference > 4)) {
      inconsistent("ground-truth grade outside 1-4");
    }
  }

  if (!artifact_root.empty()) {
    for (const auto& [name, path] : r.artifacts) {
      if (!std::filesystem::exists(artifact_root / path)) {
        inconsistent("artifact '" + name + "' does not exist at " + (artifact_root / path).string());
      }
    }
  }
}

CaseReport build_case_report(const ReportInputs& in) {
  CaseReport r;
  r.case_id = in.case_id;
  r.slide_id = in.slide_id;
  r.metrics = in.metrics;
  r.triage = in.triage;
  r.subtype = in.subtype;
  r.grade = in.grade;
  r.artifacts = in.artifacts;
  r.provenance = in.provenance;
  r.review_flags = in.review_flags;
  if (in.metrics.tissue_patch_count == 0) r.review_flags.push_back("zero_tissue");
  std::sort(r.review_flags.begin(), r.review_flags.end());
  r.review_flags.erase(std::unique(r.review_flags.begin(), r.review_flags.end()), r.review_flags.end());

  if (!in.ground_truth.empty()) {
    GroundTruthComparison gt;
    gt.subtype_reference = in.ground_truth.subtype;
    gt.grade_reference = in.ground_truth.isup_grade;
    if (r.subtype) gt.subtype_predicted = r.subtype->slide_label_name();
    if (r.grade) gt.grade_predicted = r.grade->slide_grade;
    r.ground_truth_comparison = gt;
  }
  check_report(r, in.artifact_root);
  return r;
}

// ---- serialization ----------------------------------------------------------

namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

json report_to_json(const CaseReport& r) {
  json j;
  j["schema_version"] = r.schema_version;
  j["case"] = {{"id", r.case_id}};
  j["slide"] = {{"id", r.slide_id}, {"review_flags", r.review_flags}};
  const SlideMetrics& m = r.metrics;
  j["metrics"] = {
      {"tissue_area_mm2", m.tissue_area_mm2},
      {"tumor_area_mm2", m.tumor_area_mm2},
      {"tumor_fraction", m.tumor_fraction},
      {"tissue_patch_count", m.tissue_patch_count},
      {"tumor_patch_count", m.tumor_patch_count},
      {"patch_area_mm2", m.patch_area_mm2},
      {"triaged_patch_count", r.triage.triaged_patch_count},
      {"trigger_rate", r.triage.trigger_rate},
  };
  if (r.subtype) {
    const SubtypeSummary& s = *r.subtype;
    json labels = json::array();
    for (const auto& st : s.per_label) {
      labels.push_back({{"label", st.label},
                        {"patch_count", st.patch_count},
                        {"proportion", st.proportion},
                        {"area_mm2", st.area_mm2},
                        {"mean_probability", st.mean_probability}});
    }
    j["subtype"] = {{"per_label", labels},
                    {"tumor_patch_count", s.tumor_patch_count},
                    {"slide_label", s.slide_label_name()},
                    {"slide_confidence", s.slide_confidence},
                    {"patch_area_mm2", s.patch_area_mm2}};
  } else {
    j["subtype"] = nullptr;
  }
  if (r.grade) {
    const GradeSummary& g = *r.grade;
    j["grade"] = {{"patch_count", g.patch_count},
                  {"g4_count", g.g4_count},
                  {"g4_fraction", g.g4_fraction},
                  {"mean_probs_g123", g.mean_probs_g123},
                  {"grade_percentages", g.grade_percentages},
                  {"slide_grade", g.slide_grade}};
  } else {
    j["grade"] = nullptr;
  }
  j["artifacts"] = r.artifacts;
  j["provenance"] = {{"model_versions", r.provenance.model_versions},
                     {"config_digest", r.provenance.config_digest},
                     {"engine_version", r.provenance.engine_version},
                     {"timestamp", r.provenance.timestamp},
                     {"seed", r.provenance.seed}};
  if (r.ground_truth_comparison) {
    const auto& gt = *r.ground_truth_comparison;
    j["ground_truth_comparison"] = {{"subtype_reference", optional_json(gt.subtype_reference)},
                                    {"subtype_predicted", optional_json(gt.subtype_predicted)},
                                    {"subtype_match", optional_json(gt.subtype_match())},
                                    {"grade_reference", optional_json(gt.grade_reference)},
                                    {"grade_predicted", optional_json(gt.grade_predicted)},
                                    {"grade_match", optional_json(gt.grade_match())}};
  }
  return j;
}

std::string percent(double v) { return printf_string("%.1f%%", 100.0 * v); }
std::string area(double v) { return printf_string("%.3f mm2", v); }

std::string report_to_text(const CaseReport& r) {
  std::string t;
  auto line = [&t](const std::string& s) { t += s + "\n"; };
  line("Whole-case report");
  line("Case: " + r.case_id);
  line("Slide: " + r.slide_id);
  line("");
  line("Tissue area: " + area(r.metrics.tissue_area_mm2));
  line("Tumor area: " + area(r.metrics.tumor_area_mm2));
  line("Tumor proportion: " + percent(r.metrics.tumor_fraction));
  line(printf_string("Tissue patches: %zu, tumor patches: %zu, triaged: %zu (%s)",
                     r.metrics.tissue_patch_count, r.metrics.tumor_patch_count,
                     r.triage.triaged_patch_count, percent(r.triage.trigger_rate).c_str()));
  line("");
  if (r.subtype) {
    const SubtypeSummary& s = *r.subtype;
    line("Subtype: " + s.slide_label_name() + " (mean probability " + percent(s.slide_confidence) + ")");
    for (const auto& st : s.per_label) {
      line(printf_string("  %-6s %6s  %s  %zu patches", st.label.c_str(), percent(st.proportion).c_str(),
                         area(st.area_mm2).c_str(), st.patch_count));
    }
  } else {
    line("Subtype: not available");
  }
  if (r.grade) {
    const GradeSummary& g = *r.grade;
    line(printf_string("ISUP grade: %d", g.slide_grade));
    for (int k = 0; k < 4; ++k) {
      line(printf_string("  G%d %6s", k + 1, percent(g.grade_percentages[k]).c_str()));
    }
    line("  G4 patch fraction: " + percent(g.g4_fraction));
  } else {
    line("ISUP grade: not available");
  }
  if (r.ground_truth_comparison) {
    const auto& gt = *r.ground_truth_comparison;
    line("");
    auto verdict = [](const std::optional<bool>& m) {
      return m ? (*m ? std::string("match") : std::string("mismatch")) : std::string("n/a");
    };
    if (gt.subtype_reference) {
      line("Reference subtype: " + *gt.subtype_reference + " (" + verdict(gt.subtype_match()) + ")");
    }
    if (gt.grade_reference) {
      line(printf_string("Reference grade: %d (%s)", *gt.grade_reference, verdict(gt.grade_match()).c_str()));
    }
  }
  line("");
  std::string flags;
  for (const auto& f : r.review_flags) flags += (flags.empty() ? "" : ", ") + f;
  line("Review flags: " + (flags.empty() ? std::string("none") : flags));
  for (const auto& [name, path] : r.artifacts) line("Artifact " + name + ": " + path);
  for (const auto& [task, version] : r.provenance.model_versions) line("Model " + task + ": " + version);
  line("Config digest: " + r.provenance.config_digest);
  line("Engine version: " + r.provenance.engine_version);
  line("Generated: " + r.provenance.timestamp);
  return t;
}

}  // namespace

std::string serialize_report(const CaseReport& report, ReportFormat format) {
  if (format == ReportFormat::kText) return report_to_text(report);
  return report_to_json(report).dump(2) + "\n";
}

CaseReport parse_report_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    CaseReport r;
    r.schema_version = j.at("schema_version").get<int>();
    r.case_id = j.at("case").at("id").get<std::string>();
    r.slide_id = j.at("slide").at("id").get<std::string>();
    r.review_flags = j.at("slide").at("review_flags").get<std::vector<std::string>>();
    const json& m = j.at("metrics");
    r.metrics.tissue_area_mm2 = m.at("tissue_area_mm2").get<double>();
    r.metrics.tumor_area_mm2 = m.at("tumor_area_mm2").get<double>();
    r.metrics.tumor_fraction = m.at("tumor_fraction").get<double>();
    r.metrics.tissue_patch_count = m.at("tissue_patch_count").get<std::size_t>();
    r.metrics.tumor_patch_count = m.at("tumor_patch_count").get<std::size_t>();
    r.metrics.patch_area_mm2 = m.at("patch_area_mm2").get<double>();
    r.triage.triaged_patch_count = m.at("triaged_patch_count").get<std::size_t>();
    r.triage.trigger_rate = m.at("trigger_rate").get<double>();
    if (!j.at("subtype").is_null()) {
      const json& s = j.at("subtype");
      SubtypeSummary sum;
      for (const json& st : s.at("per_label")) {
        sum.per_label.push_back({st.at("label").get<std::string>(), st.at("patch_count").get<std::size_t>(),
                                 st.at("proportion").get<double>(), st.at("area_mm2").get<double>(),
                                 st.at("mean_probability").get<double>()});
      }
      sum.tumor_patch_count = s.at("tumor_patch_count").get<std::size_t>();
      sum.slide_confidence = s.at("slide_confidence").get<double>();
      sum.patch_area_mm2 = s.at("patch_area_mm2").get<double>();
      const auto name = s.at("slide_label").get<std::string>();
      const auto it = std::find_if(sum.per_label.begin(), sum.per_label.end(),
                                   [&](const SubtypeLabelStats& st) { return st.label == name; });
      require(it != sum.per_label.end(), ErrorCode::kInvalidInput, "slide_label not among per_label");
      sum.slide_label = static_cast<std::size_t>(it - sum.per_label.begin());
      r.subtype = std::move(sum);
    }
    if (!j.at("grade").is_null()) {
      const json& g = j.at("grade");
      GradeSummary sum;
      sum.patch_count = g.at("patch_count").get<std::size_t>();
      sum.g4_count = g.at("g4_count").get<std::size_t>();
      sum.g4_fraction = g.at("g4_fraction").get<double>();
      sum.mean_probs_g123 = g.at("mean_probs_g123").get<std::array<double, 3>>();
      sum.grade_percentages = g.at("grade_percentages").get<std::array<double, 4>>();
      sum.slide_grade = g.at("slide_grade").get<int>();
      r.grade = sum;
    }
    r.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    const json& p = j.at("provenance");
    r.provenance.model_versions = p.at("model_versions").get<std::map<std::string, std::string>>();
    r.provenance.config_digest = p.at("config_digest").get<std::string>();
    r.provenance.engine_version = p.at("engine_version").get<std::string>();
    r.provenance.timestamp = p.at("timestamp").get<std::string>();
    r.provenance.seed = p.at("seed").get<std::uint64_t>();
    if (j.contains("ground_truth_comparison")) {
      const json& g = j.at("ground_truth_comparison");
      GroundTruthComparison gt;
      gt.subtype_reference = optional_from<std::string>(g, "subtype_reference");
      gt.subtype_predicted = optional_from<std::string>(g, "subtype_predicted");
      gt.grade_reference = optional_from<int>(g, "grade_reference");
      gt.grade_predicted = optional_from<int>(g, "grade_predicted");
      r.ground_truth_comparison = gt;
    }
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("malformed report JSON: ") + e.what());
  }
}

void write_report_files(const CaseReport& report, const std::filesystem::path& dir) {
  check_report(report, dir);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.json", serialize_report(report, ReportFormat::kJson));
  write_text_file(dir / "report.txt", serialize_report(report, ReportFormat::kText));
}

}  // namespace rccpath
