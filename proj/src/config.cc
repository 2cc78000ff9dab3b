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

#include "rccpath/config.h"

#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rccpath/error.h"
#include "rccpath/image_io.h"
#include "rccpath/inference.h"
#include "toml.hpp"

namespace rccpath {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using LineMap = std::map<std::string, int>;

json toml_to_json(const toml::node& node, const std::string& path, LineMap& lines) {
  if (path.size()) lines[path] = static_cast<int>(node.source().begin.line);
  if (const auto* t = node.as_table()) {
    json j = json::object();
    for (auto&& [k, v] : *t) {
      const std::string key(k.str());
      j[key] = toml_to_json(v, path.empty() ? key : path + "." + key, lines);
    }
    return j;
  }
  if (const auto* a = node.as_array()) {
    json j = json::array();
    for (std::size_t i = 0; i < a->size(); ++i) {
      j.push_back(toml_to_json(*a->get(i), path + "[" + std::to_string(i) + "]", lines));
    }
    return j;
  }
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  std::ostringstream os;
  node.visit([&os](auto&& n) { os << n; });
  return os.str();
}

/// Reads known keys from one object and rejects the rest.
class SectionReader {
 public:
  SectionReader(const json& obj, std::string path, const LineMap& lines, const std::string& origin)
      : obj_(obj), path_(std::move(path)), lines_(lines), origin_(origin) {
    if (!obj_.is_object()) error(path_, "must be a table/object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      error(field(key), "has the wrong type");
    }
  }

  void get_path(const char* key, fs::path& out, const fs::path& base) {
    std::string s;
    const bool present = obj_.contains(key);
    get(key, s);
    if (!present) return;
    out = s.empty() ? fs::path() : (fs::path(s).is_relative() ? base / s : fs::path(s));
  }

  const json* section(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) error(field(it.key()), "is not a recognized key");
    }
  }

  [[noreturn]] void error(const std::string& field_name, const std::string& what) const {
    std::string where = origin_;
    if (auto it = lines_.find(field_name); it != lines_.end()) where += ":" + std::to_string(it->second);
    fail(ErrorCode::kConfigError, where + ": " + field_name + " " + what);
  }

 private:
  const json& obj_;
  std::string path_;
  const LineMap& lines_;
  const std::string& origin_;
  std::set<std::string> seen_;
};

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  fail(ErrorCode::kConfigError, field + " " + what);
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) config_error(field, what);
}

void check_existing(const fs::path& p, const std::string& field) {
  if (!p.empty()) check(fs::exists(p), field, "refers to a missing file: " + p.string());
}

PipelineConfig config_from_json(const json& root, const fs::path& base, const LineMap& lines,
                                const std::string& origin) {
  PipelineConfig cfg;
  cfg.base_dir = base;
  SectionReader top(root, "", lines, origin);

  if (const json* s = top.section("paths")) {
    SectionReader r(*s, "paths", lines, origin);
    PathsConfig& p = cfg.paths;
    r.get_path("store", p.store, base);
    r.get_path("output", p.output, base);
    r.get_path("stain_reference", p.stain_reference, base);
    r.get_path("tumor_model", p.tumor_model, base);
    r.get_path("tumor_magnified_model", p.tumor_magnified_model, base);
    r.get_path("subtype_model", p.subtype_model, base);
    r.get_path("g4_model", p.g4_model, base);
    r.get_path("grade_model", p.grade_model, base);
    r.finish();
  }
  if (!cfg.paths.store.is_absolute()) cfg.paths.store = base / cfg.paths.store;
  if (!cfg.paths.output.is_absolute()) cfg.paths.output = base / cfg.paths.output;

  if (const json* s = top.section("detection")) {
    SectionReader r(*s, "detection", lines, origin);
    DetectionConfig& d = cfg.detection;
    r.get("patch_size", d.patch_size);
    r.get("magnification", d.magnification);
    r.get("tissue_od_threshold", d.tissue_od_threshold);
    r.get("mask_stride", d.mask_stride);
    r.get("min_tissue_fraction", d.min_tissue_fraction);
    r.finish();
  }
  auto read_region = [](RegionConfig& rc, SectionReader& r) {
    r.get("patch_size", rc.patch_size);
    r.get("magnification", rc.magnification);
    r.get("min_tumor_overlap", rc.min_tumor_overlap);
  };
  if (const json* s = top.section("subtype")) {
    SectionReader r(*s, "subtype", lines, origin);
    read_region(cfg.subtype, r);
    r.finish();
  }
  if (const json* s = top.section("grade")) {
    SectionReader r(*s, "grade", lines, origin);
    read_region(cfg.grade.region, r);
    r.get("g4_threshold", cfg.grade.g4_threshold);
    r.get("g4_override", cfg.grade.g4_override);
    r.finish();
  }
  if (const json* s = top.section("triage")) {
    SectionReader r(*s, "triage", lines, origin);
    TriageConfig& t = cfg.triage;
    r.get("low", t.low);
    r.get("high", t.high);
    r.get("decision_threshold", t.decision_threshold);
    r.get("magnification_factor", t.magnification_factor);
    r.get("rotation_flip", t.use_rotation_flip);
    r.get("magnification", t.use_magnification);
    r.get("neighbor", t.use_neighbor);
    r.finish();
  }
  if (const json* s = top.section("stain")) {
    SectionReader r(*s, "stain", lines, origin);
    MacenkoParams& m = cfg.stain;
    r.get("beta", m.beta);
    r.get("alpha", m.alpha);
    r.get("concentration_percentile", m.concentration_percentile);
    r.get("min_stained_pixels", m.min_stained_pixels);
    r.get("min_stain_separation_deg", m.min_stain_separation_deg);
    r.finish();
  }
  if (const json* s = top.section("render")) {
    SectionReader r(*s, "render", lines, origin);
    r.get("alpha", cfg.render.alpha);
    r.get("thumbnail_max_dim", cfg.render.thumbnail_max_dim);
    r.get("heatmaps", cfg.render.heatmaps);
    r.finish();
  }
  if (const json* s = top.section("run")) {
    SectionReader r(*s, "run", lines, origin);
    r.get("workers", cfg.run.workers);
    r.get("seed", cfg.run.seed);
    r.get("report_timestamp", cfg.run.report_timestamp);
    r.get("tile_size", cfg.run.tile_size);
    r.get("patch_records", cfg.run.patch_records);
    r.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

json settings_json(const PipelineConfig& c) {
  json j;
  j["detection"] = {{"patch_size", c.detection.patch_size},
                    {"magnification", c.detection.magnification},
                    {"tissue_od_threshold", c.detection.tissue_od_threshold},
                    {"mask_stride", c.detection.mask_stride},
                    {"min_tissue_fraction", c.detection.min_tissue_fraction}};
  auto region = [](const RegionConfig& r) {
    return json{{"patch_size", r.patch_size},
                {"magnification", r.magnification},
                {"min_tumor_overlap", r.min_tumor_overlap}};
  };
  j["subtype"] = region(c.subtype);
  j["grade"] = region(c.grade.region);
  j["grade"]["g4_threshold"] = c.grade.g4_threshold;
  j["grade"]["g4_override"] = c.grade.g4_override;
  j["triage"] = {{"low", c.triage.low},
                 {"high", c.triage.high},
                 {"decision_threshold", c.triage.decision_threshold},
                 {"magnification_factor", c.triage.magnification_factor},
                 {"rotation_flip", c.triage.use_rotation_flip},
                 {"magnification", c.triage.use_magnification},
                 {"neighbor", c.triage.use_neighbor}};
  j["stain"] = {{"beta", c.stain.beta},
                {"alpha", c.stain.alpha},
                {"concentration_percentile", c.stain.concentration_percentile},
                {"min_stained_pixels", c.stain.min_stained_pixels},
                {"min_stain_separation_deg", c.stain.min_stain_separation_deg}};
  j["render"] = {{"alpha", c.render.alpha},
                 {"thumbnail_max_dim", c.render.thumbnail_max_dim},
                 {"heatmaps", c.render.heatmaps}};
  j["run"] = {{"seed", c.run.seed},
              {"report_timestamp", c.run.report_timestamp},
              {"tile_size", c.run.tile_size},
              {"patch_records", c.run.patch_records}};
  return j;
}

bool safe_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char ch : id) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) return false;
  }
  return true;
}

}  // namespace

void PipelineConfig::validate() const {
  check(!paths.tumor_model.empty(), "paths.tumor_model", "is required");
  check_existing(paths.tumor_model, "paths.tumor_model");
  check_existing(paths.tumor_magnified_model, "paths.tumor_magnified_model");
  check_existing(paths.subtype_model, "paths.subtype_model");
  check_existing(paths.g4_model, "paths.g4_model");
  check_existing(paths.grade_model, "paths.grade_model");
  check_existing(paths.stain_reference, "paths.stain_reference");
  check(paths.g4_model.empty() == paths.grade_model.empty(), "paths.g4_model",
        "and paths.grade_model must be given together");

  check(detection.patch_size > 0, "detection.patch_size", "must be positive");
  check(detection.magnification > 0, "detection.magnification", "must be positive");
  check(detection.tissue_od_threshold > 0 && detection.tissue_od_threshold < 3,
        "detection.tissue_od_threshold", "must be in (0, 3)");
  check(detection.mask_stride > 0, "detection.mask_stride", "must be positive");
  check(detection.min_tissue_fraction >= 0 && detection.min_tissue_fraction <= 1,
        "detection.min_tissue_fraction", "must be in [0, 1]");
  for (const auto& [name, r] : {std::pair<const char*, const RegionConfig*>{"subtype", &subtype},
                                {"grade", &grade.region}}) {
    const std::string n(name);
    check(r->patch_size > 0, n + ".patch_size", "must be positive");
    check(r->magnification > 0, n + ".magnification", "must be positive");
    check(r->min_tumor_overlap > 0 && r->min_tumor_overlap <= 1, n + ".min_tumor_overlap",
          "must be in (0, 1]");
  }
  check(grade.g4_threshold > 0 && grade.g4_threshold < 1, "grade.g4_threshold", "must be in (0, 1)");
  check(grade.g4_override >= 0 && grade.g4_override <= 1, "grade.g4_override", "must be in [0, 1]");

  check(triage.low >= 0 && triage.low < triage.decision_threshold, "triage.low",
        "must satisfy 0 <= low < decision_threshold");
  check(triage.decision_threshold < triage.high, "triage.decision_threshold",
        "must be below triage.high");
  check(triage.high <= 1, "triage.high", "must be at most 1");
  check(triage.magnification_factor >= 2 &&
            (triage.magnification_factor & (triage.magnification_factor - 1)) == 0,
        "triage.magnification_factor", "must be a power of two >= 2");
  check(int(triage.use_rotation_flip) + int(triage.use_magnification) + int(triage.use_neighbor) >= 2,
        "triage", "needs at least two strategies enabled for a vote");

  check(stain.beta > 0, "stain.beta", "must be positive");
  check(stain.alpha > 0 && stain.alpha < 50, "stain.alpha", "must be in (0, 50)");
  check(stain.concentration_percentile > 0 && stain.concentration_percentile <= 100,
        "stain.concentration_percentile", "must be in (0, 100]");
  check(stain.min_stained_pixels >= 2, "stain.min_stained_pixels", "must be at least 2");
  check(stain.min_stain_separation_deg >= 0, "stain.min_stain_separation_deg", "must be non-negative");

  check(render.alpha >= 0 && render.alpha <= 1, "render.alpha", "must be in [0, 1]");
  check(render.thumbnail_max_dim > 0, "render.thumbnail_max_dim", "must be positive");
  check(run.workers >= 1, "run.workers", "must be at least 1");
  check(run.tile_size >= 16, "run.tile_size", "must be at least 16");
}

std::string PipelineConfig::digest() const { return sha256_hex(settings_json(*this).dump()); }

std::string config_to_json(const PipelineConfig& c) {
  json j = settings_json(c);
  j["run"]["workers"] = c.run.workers;
  j["paths"] = {{"store", c.paths.store.string()},
                {"output", c.paths.output.string()},
                {"stain_reference", c.paths.stain_reference.string()},
                {"tumor_model", c.paths.tumor_model.string()},
                {"tumor_magnified_model", c.paths.tumor_magnified_model.string()},
                {"subtype_model", c.paths.subtype_model.string()},
                {"g4_model", c.paths.g4_model.string()},
                {"grade_model", c.paths.grade_model.string()}};
  return j.dump(2) + "\n";
}

PipelineConfig parse_config(const std::string& text, const std::string& format_hint,
                            const fs::path& base_dir, const std::string& origin) {
  LineMap lines;
  json root;
  if (format_hint == "json") {
    try {
      root = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kConfigError, origin + ": JSON parse error at byte " + std::to_string(e.byte) +
                                        ": " + e.what());
    }
  } else {
    try {
      const toml::table table = toml::parse(text, origin);
      root = toml_to_json(table, "", lines);
    } catch (const toml::parse_error& e) {
      fail(ErrorCode::kConfigError, origin + ":" + std::to_string(e.source().begin.line) + ":" +
                                        std::to_string(e.source().begin.column) + ": " +
                                        std::string(e.description()));
    }
  }
  return config_from_json(root, base_dir, lines, origin);
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::kConfigError, "config file " + path.string() + " not found");
  const std::string text = read_text_file(path);
  const fs::path base = fs::absolute(path).parent_path();
  return parse_config(text, path.extension() == ".json" ? "json" : "toml", base, path.string());
}

void CaseManifest::validate() const {
  check(safe_id(case_id), "case_id", "must be a non-empty name of letters, digits, '.', '_' or '-'");
  check(!slides.empty(), "case " + case_id, "needs at least one slide");
  std::set<std::string> ids;
  for (const auto& s : slides) {
    check(safe_id(s.slide_id), "slide_id", "'" + s.slide_id + "' is not a valid name");
    check(ids.insert(s.slide_id).second, "slide_id", "'" + s.slide_id + "' repeats within case " + case_id);
    check(!s.image.empty(), "slides.image", "is required for slide " + s.slide_id);
    if (s.mpp) check(*s.mpp > 0, "slides.mpp", "must be positive");
    if (s.magnification) check(*s.magnification > 0, "slides.magnification", "must be positive");
  }
  if (labels.subtype) {
    const auto& names = LabelSchema::for_task(Task::kSubtype3).labels;
    check(std::find(names.begin(), names.end(), *labels.subtype) != names.end(), "labels.subtype",
          "'" + *labels.subtype + "' is not one of ccRCC, pRCC, chRCC");
  }
  if (labels.isup_grade) {
    check(*labels.isup_grade >= 1 && *labels.isup_grade <= 4, "labels.isup_grade", "must be 1-4");
  }
}

std::vector<CaseManifest> parse_manifests(const std::string& json_text, const fs::path& base_dir,
                                          const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfigError, origin + ": JSON parse error at byte " + std::to_string(e.byte));
  }
  const LineMap no_lines;
  auto parse_case = [&](const json& j, const std::string& path) {
    SectionReader r(j, path, no_lines, origin);
    CaseManifest m;
    r.get("case_id", m.case_id);
    r.get("source", m.source);
    if (const json* labels = r.section("labels")) {
      SectionReader lr(*labels, path + ".labels", no_lines, origin);
      std::optional<std::string> subtype;
      std::optional<int> grade;
      if (labels->contains("subtype") && !labels->at("subtype").is_null()) {
        std::string s;
        lr.get("subtype", s);
        subtype = s;
      } else {
        lr.section("subtype");
      }
      if (labels->contains("isup_grade") && !labels->at("isup_grade").is_null()) {
        int g = 0;
        lr.get("isup_grade", g);
        grade = g;
      } else {
        lr.section("isup_grade");
      }
      lr.finish();
      m.labels.subtype = subtype;
      m.labels.isup_grade = grade;
    }
    const json* slides = r.section("slides");
    if (!slides || !slides->is_array()) r.error(r.field("slides"), "must be an array");
    for (std::size_t i = 0; i < slides->size(); ++i) {
      SectionReader sr(slides->at(i), path + ".slides[" + std::to_string(i) + "]", no_lines, origin);
      SlideEntry e;
      sr.get("slide_id", e.slide_id);
      sr.get_path("image", e.image, base_dir);
      double v = 0;
      if (slides->at(i).contains("mpp")) {
        sr.get("mpp", v);
        e.mpp = v;
      }
      if (slides->at(i).contains("magnification")) {
        sr.get("magnification", v);
        e.magnification = v;
      }
      sr.finish();
      m.slides.push_back(std::move(e));
    }
    r.finish();
    m.validate();
    return m;
  };

  std::vector<CaseManifest> out;
  if (root.is_object() && root.contains("cases")) {
    SectionReader r(root, "", no_lines, origin);
    const json* cases = r.section("cases");
    r.finish();
    if (!cases->is_array()) r.error("cases", "must be an array");
    for (std::size_t i = 0; i < cases->size(); ++i) {
      out.push_back(parse_case(cases->at(i), "cases[" + std::to_string(i) + "]"));
    }
  } else {
    out.push_back(parse_case(root, ""));
  }
  check(!out.empty(), "cases", "must list at least one case");
  std::set<std::string> ids;
  for (const auto& m : out) check(ids.insert(m.case_id).second, "case_id", "'" + m.case_id + "' repeats");
  return out;
}

std::vector<CaseManifest> load_manifests(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::kConfigError, "manifest " + path.string() + " not found");
  return parse_manifests(read_text_file(path), fs::absolute(path).parent_path(), path.string());
}

}  // namespace rccpath
