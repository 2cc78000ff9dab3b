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


// Python bindings for the engine. Images cross the boundary as HxWx3 uint8
// numpy arrays; summaries come back as plain dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "rccpath/config.h"
#include "rccpath/diagnosis.h"
#include "rccpath/error.h"
#include "rccpath/image_io.h"
#include "rccpath/inference.h"
#include "rccpath/pipeline.h"
#include "rccpath/render_report.h"
#include "rccpath/slide_store.h"
#include "rccpath/stain_norm.h"
#include "rccpath/triage.h"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace rccpath;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

RgbImage to_image(const ImageArray& a) {
  require(a.ndim() == 3 && a.shape(2) == 3, ErrorCode::kInvalidInput, "expected an HxWx3 uint8 array");
  RgbImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.pixels.data(), a.data(), img.pixels.size());
  return img;
}

ImageArray to_array(const RgbImage& img) {
  ImageArray a({img.height, img.width, 3});
  std::memcpy(a.mutable_data(), img.pixels.data(), img.pixels.size());
  return a;
}

Patch to_patch(const ImageArray& a) {
  Patch p;
  p.image = to_image(a);
  p.origin = {0, 0, 0, p.image.width};
  return p;
}

py::dict profile_dict(const StainProfile& p) {
  py::list cols;
  for (int c = 0; c < 2; ++c) {
    cols.append(py::make_tuple(p.stain_matrix(0, c), p.stain_matrix(1, c), p.stain_matrix(2, c)));
  }
  py::dict d;
  d["stain_matrix"] = cols;
  d["max_concentrations"] = py::make_tuple(p.max_concentrations[0], p.max_concentrations[1]);
  d["io"] = p.io;
  d["json"] = stain_profile_to_json(p);
  return d;
}

py::dict subtype_dict(const SubtypeSummary& s) {
  py::list per_label;
  for (const auto& l : s.per_label) {
    py::dict d;
    d["label"] = l.label;
    d["patch_count"] = l.patch_count;
    d["proportion"] = l.proportion;
    d["area_mm2"] = l.area_mm2;
    d["mean_probability"] = l.mean_probability;
    per_label.append(d);
  }
  py::dict d;
  d["per_label"] = per_label;
  d["tumor_patch_count"] = s.tumor_patch_count;
  d["slide_label"] = s.slide_label_name();
  d["slide_confidence"] = s.slide_confidence;
  d["patch_area_mm2"] = s.patch_area_mm2;
  return d;
}

py::dict grade_dict(const GradeSummary& g) {
  py::dict d;
  d["patch_count"] = g.patch_count;
  d["g4_count"] = g.g4_count;
  d["g4_fraction"] = g.g4_fraction;
  d["mean_probs_g123"] = g.mean_probs_g123;
  d["grade_percentages"] = g.grade_percentages;
  d["slide_grade"] = g.slide_grade;
  return d;
}

class PyClassifier {
 public:
  explicit PyClassifier(ClassifierHandle h) : h_(std::move(h)) {}
  std::vector<double> predict(const ImageArray& a) const { return h_->predict(to_patch(a)).values; }
  std::string task() const { return std::string(task_name(h_->task())); }
  int input_size() const { return h_->info().input_size; }
  double expected_mpp() const { return h_->info().expected_mpp; }
  std::string version() const { return h_->info().version; }
  std::vector<std::string> labels() const { return h_->info().schema.labels; }

 private:
  ClassifierHandle h_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Whole-slide renal cell carcinoma analysis engine";
  m.attr("__version__") = RCCPATH_VERSION;

  // Held for the life of the interpreter; the translator raises instances
  // carrying the error code name and the bare message.
  static py::handle error_type = py::exception<Error>(m, "RccpathError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(error_code_name(e.code()));
      exc.attr("detail") = e.detail();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  // slide store
  py::class_<SlidePyramid>(m, "Pyramid")
      .def_static(
          "from_image",
          [](const ImageArray& image, const std::string& slide_id, const std::string& case_id, double mpp,
             double magnification, int tile_size) {
            IngestOptions o;
            o.slide_id = slide_id;
            o.case_id = case_id;
            o.mpp_base = mpp;
            o.magnification_base = magnification;
            o.tile_size = tile_size;
            const RgbImage img = to_image(image);
            py::gil_scoped_release release;
            return ingest_base_image(img, o);
          },
          py::arg("image"), py::arg("slide_id") = "slide", py::arg("case_id") = "case", py::arg("mpp") = 0.25,
          py::arg("magnification") = 40.0, py::arg("tile_size") = kDefaultTileSize)
      .def_static("load", &load_pyramid, py::arg("directory"))
      .def("save", [](const SlidePyramid& p, const fs::path& dir) { save_pyramid(p, dir); }, py::arg("directory"))
      .def_property_readonly("slide_id", &SlidePyramid::slide_id)
      .def_property_readonly("case_id", &SlidePyramid::case_id)
      .def_property_readonly("tile_size", &SlidePyramid::tile_size)
      .def_property_readonly("level_count", &SlidePyramid::level_count)
      .def("level_size",
           [](const SlidePyramid& p, int level) {
             const Level& l = p.level(level);
             return py::make_tuple(l.width, l.height);
           })
      .def("mpp_at", &SlidePyramid::mpp_at)
      .def("magnification_at", &SlidePyramid::magnification_at)
      .def("read_region",
           [](const SlidePyramid& p, int level, std::int64_t x, std::int64_t y, int size) {
             return to_array(read_region(p, {level, x, y, size}).image);
           },
           py::arg("level"), py::arg("x"), py::arg("y"), py::arg("size"))
      .def("read_level", [](const SlidePyramid& p, int level) { return to_array(read_level(p, level)); })
      .def(
          "tissue_mask",
          [](const SlidePyramid& p, int level, double od_threshold, int stride) {
            const BinaryMask mask = tissue_mask(p, level, od_threshold, stride);
            py::array_t<bool> out({mask.rows, mask.cols});
            auto v = out.mutable_unchecked<2>();
            for (int r = 0; r < mask.rows; ++r) {
              for (int c = 0; c < mask.cols; ++c) v(r, c) = mask.at(c, r);
            }
            return out;
          },
          py::arg("level"), py::arg("od_threshold") = kDefaultTissueOdThreshold,
          py::arg("stride") = kDefaultMaskStride)
      .def(
          "grid_patches",
          [](const SlidePyramid& p, double target_mpp, int patch_size, double od_threshold, int stride,
             double min_tissue_fraction) {
            const auto level = p.level_for_mpp(target_mpp);
            require(level.has_value(), ErrorCode::kInvalidInput, "no level at the requested mpp");
            const BinaryMask mask = tissue_mask(p, *level, od_threshold, stride);
            std::vector<std::tuple<int, std::int64_t, std::int64_t, int>> out;
            for (const auto& c : grid_patches(p, target_mpp, patch_size, mask, min_tissue_fraction)) {
              out.emplace_back(c.level, c.x, c.y, c.size);
            }
            return out;
          },
          py::arg("target_mpp"), py::arg("patch_size"), py::arg("od_threshold") = kDefaultTissueOdThreshold,
          py::arg("stride") = kDefaultMaskStride, py::arg("min_tissue_fraction") = kDefaultMinTissueFraction);

  m.def("read_image", [](const fs::path& path) { return to_array(read_image(path)); }, py::arg("path"));
  m.def("write_png", [](const fs::path& path, const ImageArray& a) { write_png(path, to_image(a)); },
        py::arg("path"), py::arg("image"));

  // stain normalization
  m.def("estimate_stain_profile",
        [](const ImageArray& a) { return profile_dict(estimate_stain_profile(to_image(a))); }, py::arg("image"));
  m.def(
      "normalize",
      [](const ImageArray& a, const std::string& reference_json) {
        const NormalizationResult r = normalize_patch(to_patch(a), stain_profile_from_json(reference_json));
        return py::make_tuple(to_array(r.patch.image), r.pass_through);
      },
      py::arg("image"), py::arg("reference_json"));
  m.def("optical_density", [](double v) { return optical_density(v); });
  m.def("intensity_from_od", [](double od) { return intensity_from_od(od); });

  // inference
  py::class_<PyClassifier>(m, "Classifier")
      .def("predict", &PyClassifier::predict, py::arg("image"))
      .def_property_readonly("task", &PyClassifier::task)
      .def_property_readonly("input_size", &PyClassifier::input_size)
      .def_property_readonly("expected_mpp", &PyClassifier::expected_mpp)
      .def_property_readonly("version", &PyClassifier::version)
      .def_property_readonly("labels", &PyClassifier::labels);
  m.def(
      "load_classifier",
      [](const fs::path& source, std::optional<std::string> task) {
        std::optional<Task> t;
        if (task) t = parse_task(*task);
        return PyClassifier(load_classifier(source, t));
      },
      py::arg("source"), py::arg("task") = py::none());
  m.def("softmax", [](const std::vector<double>& v) { return softmax(v); });

  // triage
  m.def(
      "needs_secondary",
      [](double p, double low, double high) {
        TriageConfig cfg;
        cfg.low = low;
        cfg.high = high;
        return needs_secondary(p, cfg);
      },
      py::arg("p_tumor"), py::arg("low") = 0.2, py::arg("high") = 0.8);

  // diagnosis
  m.def("patch_area_mm2", &patch_area_mm2, py::arg("patch_size"), py::arg("mpp"));
  m.def(
      "aggregate_subtypes",
      [](const std::vector<std::vector<double>>& probs, double patch_area) {
        std::vector<SubtypeRecord> records;
        records.reserve(probs.size());
        for (const auto& p : probs) {
          SubtypeRecord r;
          r.probs = p;
          r.label = argmax_index(p);
          records.push_back(std::move(r));
        }
        return subtype_dict(aggregate_subtypes(records, patch_area));
      },
      py::arg("probs"), py::arg("patch_area_mm2"));
  m.def(
      "aggregate_grade",
      [](const std::vector<std::optional<std::array<double, 3>>>& g123, double g4_override) {
        std::vector<GradeRecord> records(g123.size());
        for (std::size_t i = 0; i < g123.size(); ++i) {
          records[i].is_g4 = !g123[i].has_value();
          records[i].p_g4 = records[i].is_g4 ? 1.0 : 0.0;
          records[i].g123 = g123[i];
        }
        return grade_dict(aggregate_grade(records, g4_override));
      },
      py::arg("g123"), py::arg("g4_override") = kDefaultG4Override,
      "One entry per patch: None for a G4 patch, else its G1/G2/G3 probabilities.");
  m.def(
      "cohens_kappa",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b) { return cohens_kappa(a, b); },
      py::arg("a"), py::arg("b"));

  // config, pipeline and reports
  m.def(
      "config_digest", [](const fs::path& path) { return load_config(path).digest(); }, py::arg("path"));
  m.def(
      "config_json", [](const fs::path& path) { return config_to_json(load_config(path)); }, py::arg("path"));
  m.def(
      "run_pipeline",
      [](const fs::path& config_path, const fs::path& manifest_path, std::optional<fs::path> output,
         std::optional<int> workers, bool force_ingest) {
        const PipelineConfig cfg = load_config(config_path);
        const auto manifests = load_manifests(manifest_path);
        RunOptions opts;
        opts.output = output;
        opts.workers = workers;
        opts.force_ingest = force_ingest;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(cfg, manifests, opts);
        }
        py::list slides;
        for (const auto& s : r.slides) {
          py::dict d;
          d["case_id"] = s.case_id;
          d["slide_id"] = s.slide_id;
          d["ok"] = s.ok;
          d["error"] = s.error_code ? py::object(py::str(std::string(error_code_name(*s.error_code))))
                                    : py::object(py::none());
          d["error_message"] = s.error_message;
          d["cache"] = s.cache;
          d["trigger_rate"] = s.trigger_rate;
          d["review_flags"] = s.review_flags;
          d["output_dir"] = s.output_dir;
          d["report_json"] = s.report ? py::object(py::str(serialize_report(*s.report, ReportFormat::kJson)))
                                      : py::object(py::none());
          slides.append(d);
        }
        py::dict out;
        out["exit_code"] = r.exit_code();
        out["summary_path"] = r.summary_path;
        out["slides"] = slides;
        return out;
      },
      py::arg("config"), py::arg("manifest"), py::arg("output") = py::none(), py::arg("workers") = py::none(),
      py::arg("force_ingest") = false);
  m.def(
      "render_report",
      [](const std::string& report_json, const std::string& format) {
        const CaseReport report = parse_report_json(report_json);
        check_report(report);
        return serialize_report(report, format == "text" ? ReportFormat::kText : ReportFormat::kJson);
      },
      py::arg("report_json"), py::arg("format") = "text");
}
