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

#include "rccpath/inference.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "onnx_model.h"
#include "rccpath/error.h"
#include "rccpath/image_io.h"

namespace rccpath {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kTumor2: return "tumor2";
    case Task::kSubtype3: return "subtype3";
    case Task::kG4Binary: return "g4binary";
    case Task::kGrade3: return "grade3";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  for (Task t : {Task::kTumor2, Task::kSubtype3, Task::kG4Binary, Task::kGrade3}) {
    if (task_name(t) == name) return t;
  }
  fail(ErrorCode::kInvalidInput, "unknown task '" + std::string(name) + "'");
}

LabelSchema LabelSchema::for_task(Task task) {
  switch (task) {
    case Task::kTumor2: return {task, {"non_tumor", "tumor"}};
    case Task::kSubtype3: return {task, {"ccRCC", "pRCC", "chRCC"}};
    case Task::kG4Binary: return {task, {"non_g4", "g4"}};
    case Task::kGrade3: return {task, {"G1", "G2", "G3"}};
  }
  fail(ErrorCode::kInvalidInput, "unknown task");
}

std::size_t LabelSchema::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return i;
  }
  fail(ErrorCode::kInvalidInput,
       "label '" + std::string(label) + "' is not in the " + std::string(task_name(task)) + " schema");
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kModelFile: return "model_file";
    case Backend::kLookupTable: return "lookup_table";
    case Backend::kProceduralStub: return "procedural_stub";
  }
  return "unknown";
}

LabelProbs make_label_probs(Task task, std::vector<double> values) {
  const std::size_t arity = LabelSchema::for_task(task).arity();
  if (values.size() != arity) {
    fail(ErrorCode::kSchemaMismatch, std::string(task_name(task)) + " expects " +
                                         std::to_string(arity) + " values, got " +
                                         std::to_string(values.size()));
  }
  constexpr double kRepairable = 1e-3;
  double sum = 0.0;
  bool in_range = true;
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::kBackendError, "non-finite probability");
    if (v < -kRepairable || v > 1.0 + kRepairable) fail(ErrorCode::kBackendError, "probability out of range");
    in_range = in_range && v >= 0.0 && v <= 1.0;
    sum += v;
  }
  if (std::abs(sum - 1.0) > kRepairable) {
    fail(ErrorCode::kBackendError, "probabilities sum to " + std::to_string(sum));
  }
  LabelProbs probs{task, std::move(values), false};
  if (!in_range || std::abs(sum - 1.0) > kProbabilityTolerance) {
    double total = 0.0;
    for (double& v : probs.values) {
      v = std::clamp(v, 0.0, 1.0);
      total += v;
    }
    for (double& v : probs.values) v /= total;
    probs.renormalized = true;
  }
  return probs;
}

std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorCode::kInvalidInput, "softmax of empty vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) {
    require(!std::isnan(v), ErrorCode::kInvalidInput, "softmax input contains NaN");
    mx = std::max(mx, v);
  }
  require(std::isfinite(mx), ErrorCode::kInvalidInput, "softmax input must be finite");
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    require(std::isfinite(logits[i]), ErrorCode::kInvalidInput, "softmax input must be finite");
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::size_t argmax_index(std::span<const double> values) {
  require(!values.empty(), ErrorCode::kInvalidInput, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

LabelProbs Classifier::predict(const Patch& patch) const {
  if (patch.width() != info_.input_size || patch.height() != info_.input_size) {
    fail(ErrorCode::kInvalidInput,
         "patch is " + std::to_string(patch.width()) + "x" + std::to_string(patch.height()) +
             ", classifier expects " + std::to_string(info_.input_size) + "x" +
             std::to_string(info_.input_size));
  }
  std::vector<double> raw;
  try {
    raw = raw_predict(patch);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::kBackendError, std::string(backend_name(info_.backend)) + ": " + e.what());
  }
  return make_label_probs(info_.schema.task, std::move(raw));
}

namespace {

void check_values_for_task(Task task, const std::vector<double>& values, const std::string& where) {
  const std::size_t arity = LabelSchema::for_task(task).arity();
  if (values.size() != arity) {
    fail(ErrorCode::kSchemaMismatch, where + ": " + std::to_string(values.size()) +
                                         " values for task " + std::string(task_name(task)) +
                                         " (expects " + std::to_string(arity) + ")");
  }
}

class LookupClassifier final : public Classifier {
 public:
  LookupClassifier(ClassifierInfo info, std::map<LookupKey, std::vector<double>> table,
                   std::optional<std::vector<double>> fallback)
      : Classifier(std::move(info)), table_(std::move(table)), fallback_(std::move(fallback)) {}

 protected:
  std::vector<double> raw_predict(const Patch& patch) const override {
    const LookupKey key{patch.origin.level, patch.origin.x, patch.origin.y};
    if (auto it = table_.find(key); it != table_.end()) return it->second;
    if (fallback_) return *fallback_;
    fail(ErrorCode::kBackendError, "lookup table has no entry for level " +
                                       std::to_string(key.level) + " (" + std::to_string(key.x) +
                                       ", " + std::to_string(key.y) + ")");
  }

 private:
  std::map<LookupKey, std::vector<double>> table_;
  std::optional<std::vector<double>> fallback_;
};

std::vector<double> binary(double positive) { return {1.0 - positive, positive}; }

class StubClassifier final : public Classifier {
 public:
  StubClassifier(ClassifierInfo info, StubSpec spec) : Classifier(std::move(info)), spec_(std::move(spec)) {}

 protected:
  std::vector<double> raw_predict(const Patch& patch) const override {
    const auto& px = patch.image.pixels;
    const std::size_t n = patch.image.pixel_count();
    switch (spec_.kind) {
      case StubKind::kConstant:
        return spec_.values;
      case StubKind::kMeanRedThreshold: {
        std::uint64_t red = 0;
        for (std::size_t i = 0; i < n; ++i) red += px[3 * i];
        const double mean_red = static_cast<double>(red) / (255.0 * static_cast<double>(n));
        return binary(mean_red >= spec_.threshold ? spec_.high : spec_.low);
      }
      case StubKind::kMeanIntensity: {
        // Integer sum keeps the result independent of pixel order.
        std::uint64_t sum = 0;
        for (std::uint8_t v : px) sum += v;
        return binary(static_cast<double>(sum) / (255.0 * static_cast<double>(px.size())));
      }
      case StubKind::kLinearSoftmax: {
        std::uint64_t s[3] = {0, 0, 0};
        for (std::size_t i = 0; i < n; ++i) {
          for (int c = 0; c < 3; ++c) s[c] += px[3 * i + static_cast<std::size_t>(c)];
        }
        std::vector<double> logits(spec_.weights.size());
        for (std::size_t k = 0; k < logits.size(); ++k) {
          double z = spec_.bias[k];
          for (int c = 0; c < 3; ++c) {
            z += spec_.weights[k][static_cast<std::size_t>(c)] *
                 (static_cast<double>(s[c]) / (255.0 * static_cast<double>(n)));
          }
          logits[k] = z;
        }
        return softmax(logits);
      }
    }
    fail(ErrorCode::kBackendError, "unknown stub kind");
  }

 private:
  StubSpec spec_;
};

struct ModelInputSpec {
  double scale = 1.0 / 255.0;
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
  bool logits = false;
};

class OnnxClassifier final : public Classifier {
 public:
  OnnxClassifier(ClassifierInfo info, std::shared_ptr<const onnx_runtime::OnnxModel> model,
                 ModelInputSpec input)
      : Classifier(std::move(info)), model_(std::move(model)), input_(input) {}

  std::vector<double> run(const RgbImage& image) const {
    onnx_runtime::Tensor t;
    t.shape = {1, 3, image.height, image.width};
    const std::size_t plane = image.pixel_count();
    t.data.resize(plane * 3);
    for (std::size_t i = 0; i < plane; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = image.pixels[3 * i + c] * input_.scale;
        t.data[c * plane + i] = static_cast<float>((v - input_.mean[c]) / input_.stddev[c]);
      }
    }
    const onnx_runtime::Tensor out = model_->run(t);
    if (out.is_integer) fail(ErrorCode::kBackendError, "model output is not floating point");
    std::vector<double> values(out.data.begin(), out.data.end());
    return input_.logits ? softmax(values) : values;
  }

 protected:
  std::vector<double> raw_predict(const Patch& patch) const override { return run(patch.image); }

 private:
  std::shared_ptr<const onnx_runtime::OnnxModel> model_;
  ModelInputSpec input_;
};

json parse_json_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidInput, "cannot parse " + path.string() + ": " + e.what());
  }
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) fail(ErrorCode::kInvalidInput, where + ": unknown key '" + key + "'");
  }
}

InputNormalization parse_normalization(const std::string& s) {
  if (s == "none") return InputNormalization::kNone;
  if (s == "macenko") return InputNormalization::kMacenko;
  fail(ErrorCode::kInvalidInput, "normalization must be 'none' or 'macenko', got '" + s + "'");
}

void check_geometry(const ClassifierInfo& info) {
  require(info.input_size > 0, ErrorCode::kInvalidInput, "input_size must be positive");
  require(info.expected_mpp > 0.0, ErrorCode::kInvalidInput, "expected_mpp must be positive");
}

ClassifierHandle load_model_file(const fs::path& model_path) {
  require(fs::exists(model_path), ErrorCode::kNotFound, "model file " + model_path.string() + " not found");
  const fs::path sidecar = sidecar_path_for(model_path);
  require(fs::exists(sidecar), ErrorCode::kNotFound,
          "model " + model_path.string() + " has no sidecar " + sidecar.string());
  const auto model_bytes = read_file_bytes(model_path);
  const auto sidecar_bytes = read_file_bytes(sidecar);
  const json meta = parse_json_file(sidecar, sidecar_bytes);

  ClassifierInfo info;
  ModelInputSpec input;
  try {
    info.schema = LabelSchema::for_task(parse_task(meta.at("task").get<std::string>()));
    info.input_size = meta.at("input_size").get<int>();
    info.expected_mpp = meta.at("expected_mpp").get<double>();
    info.normalization = parse_normalization(meta.at("normalization").get<std::string>());
    input.scale = meta.value("input_scale", 1.0 / 255.0);
    if (meta.contains("input_mean")) input.mean = meta["input_mean"].get<std::array<double, 3>>();
    if (meta.contains("input_std")) input.stddev = meta["input_std"].get<std::array<double, 3>>();
    const std::string output = meta.value("output", std::string("probabilities"));
    require(output == "probabilities" || output == "logits", ErrorCode::kInvalidInput,
            "sidecar output must be 'probabilities' or 'logits'");
    input.logits = output == "logits";
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidInput, "sidecar " + sidecar.string() + ": " + e.what());
  }
  check_geometry(info);
  info.backend = Backend::kModelFile;
  std::vector<std::uint8_t> digest_input = model_bytes;
  digest_input.insert(digest_input.end(), sidecar_bytes.begin(), sidecar_bytes.end());
  info.version = sha256_hex(digest_input);
  info.source = model_path.string();

  auto model = onnx_runtime::OnnxModel::load(model_bytes);
  const auto& in_shape = model->input_shape();
  if (in_shape.size() != 4 || (in_shape[1] != -1 && in_shape[1] != 3)) {
    fail(ErrorCode::kSchemaMismatch, "model input must be N x 3 x H x W");
  }
  for (int d : {2, 3}) {
    const std::int64_t dim = in_shape[static_cast<std::size_t>(d)];
    if (dim != -1 && dim != info.input_size) {
      fail(ErrorCode::kSchemaMismatch, "model input is " + std::to_string(dim) +
                                           " px but sidecar declares " + std::to_string(info.input_size));
    }
  }
  const std::size_t arity = info.schema.arity();
  auto classifier = std::make_shared<OnnxClassifier>(info, model, input);
  std::size_t outputs = 0;
  if (model->output_classes()) {
    outputs = static_cast<std::size_t>(*model->output_classes());
  } else {
    outputs = classifier->run(RgbImage(info.input_size, info.input_size, 0)).size();
  }
  if (outputs != arity) {
    fail(ErrorCode::kSchemaMismatch, "model has " + std::to_string(outputs) + " outputs, task " +
                                         std::string(task_name(info.schema.task)) + " needs " +
                                         std::to_string(arity));
  }
  return classifier;
}

StubSpec parse_stub(const json& j) {
  StubSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    spec.kind = StubKind::kConstant;
    spec.values = j.at("values").get<std::vector<double>>();
  } else if (kind == "mean_red_threshold") {
    spec.kind = StubKind::kMeanRedThreshold;
    spec.threshold = j.value("threshold", 0.5);
    spec.low = j.value("low", 0.02);
    spec.high = j.value("high", 0.98);
  } else if (kind == "mean_intensity") {
    spec.kind = StubKind::kMeanIntensity;
  } else if (kind == "linear_softmax") {
    spec.kind = StubKind::kLinearSoftmax;
    spec.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    spec.bias = j.at("bias").get<std::vector<double>>();
  } else {
    fail(ErrorCode::kInvalidInput, "unknown stub kind '" + kind + "'");
  }
  return spec;
}

}  // namespace

std::vector<LookupEntry> parse_lookup_fixture(const std::string& jsonl) {
  std::vector<LookupEntry> entries;
  std::istringstream in(jsonl);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      LookupEntry e;
      e.key.level = j.at("level").get<int>();
      e.key.x = j.at("x").get<std::int64_t>();
      e.key.y = j.at("y").get<std::int64_t>();
      e.values = j.at("values").get<std::vector<double>>();
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      fail(ErrorCode::kInvalidInput, "lookup fixture line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return entries;
}

std::string format_lookup_fixture(std::span<const LookupEntry> entries) {
  std::string out;
  for (const auto& e : entries) {
    json j;
    j["level"] = e.key.level;
    j["x"] = e.key.x;
    j["y"] = e.key.y;
    j["values"] = e.values;
    out += j.dump();
    out += '\n';
  }
  return out;
}

namespace {

ClassifierHandle build_lookup(const LookupOptions& options, std::vector<LookupEntry> entries,
                              std::string source, std::optional<std::string> version) {
  ClassifierInfo info;
  info.schema = LabelSchema::for_task(options.task);
  info.input_size = options.input_size;
  info.expected_mpp = options.expected_mpp;
  info.backend = Backend::kLookupTable;
  info.normalization = InputNormalization::kNone;
  info.source = std::move(source);
  check_geometry(info);

  std::map<LookupKey, std::vector<double>> table;
  for (auto& e : entries) {
    check_values_for_task(options.task, e.values, "lookup entry");
    (void)make_label_probs(options.task, e.values);
    table[e.key] = std::move(e.values);
  }
  if (options.default_values) {
    check_values_for_task(options.task, *options.default_values, "lookup default");
    (void)make_label_probs(options.task, *options.default_values);
  }
  if (version) {
    info.version = std::move(*version);
  } else {
    std::vector<LookupEntry> canonical;
    canonical.reserve(table.size());
    for (const auto& [k, v] : table) canonical.push_back({k, v});
    std::string blob = std::string(task_name(options.task)) + "\n" + format_lookup_fixture(canonical);
    if (options.default_values) blob += json(*options.default_values).dump();
    info.version = sha256_hex(blob);
  }
  return std::make_shared<LookupClassifier>(std::move(info), std::move(table), options.default_values);
}

ClassifierHandle build_stub(Task task, int input_size, double expected_mpp, StubSpec spec,
                            InputNormalization normalization, std::optional<std::string> version,
                            std::string source) {
  ClassifierInfo info;
  info.schema = LabelSchema::for_task(task);
  info.input_size = input_size;
  info.expected_mpp = expected_mpp;
  info.backend = Backend::kProceduralStub;
  info.normalization = normalization;
  check_geometry(info);
  const std::size_t arity = info.schema.arity();
  json desc;
  desc["task"] = task_name(task);
  switch (spec.kind) {
    case StubKind::kConstant:
      check_values_for_task(task, spec.values, "constant stub");
      (void)make_label_probs(task, spec.values);
      desc["values"] = spec.values;
      break;
    case StubKind::kMeanRedThreshold:
    case StubKind::kMeanIntensity:
      if (arity != 2) fail(ErrorCode::kSchemaMismatch, "this stub kind needs a binary task");
      desc["threshold"] = spec.threshold;
      desc["low"] = spec.low;
      desc["high"] = spec.high;
      desc["kind"] = spec.kind == StubKind::kMeanIntensity ? "mean_intensity" : "mean_red_threshold";
      break;
    case StubKind::kLinearSoftmax:
      if (spec.weights.size() != arity || spec.bias.size() != arity) {
        fail(ErrorCode::kSchemaMismatch, "linear stub rows must match task arity");
      }
      for (const auto& row : spec.weights) {
        require(row.size() == 3, ErrorCode::kInvalidInput, "linear stub rows need 3 weights");
      }
      desc["weights"] = spec.weights;
      desc["bias"] = spec.bias;
      break;
  }
  desc["input_size"] = input_size;
  desc["expected_mpp"] = expected_mpp;
  info.version = version ? std::move(*version) : sha256_hex(desc.dump());
  info.source = std::move(source);
  return std::make_shared<StubClassifier>(std::move(info), std::move(spec));
}

}  // namespace

ClassifierHandle make_lookup_classifier(const LookupOptions& options, std::vector<LookupEntry> entries,
                                        std::string source) {
  return build_lookup(options, std::move(entries), std::move(source), std::nullopt);
}

ClassifierHandle make_stub_classifier(Task task, int input_size, double expected_mpp, StubSpec spec) {
  return build_stub(task, input_size, expected_mpp, std::move(spec), InputNormalization::kNone,
                    std::nullopt, "<stub>");
}

fs::path sidecar_path_for(const fs::path& model_path) {
  fs::path p = model_path;
  p.replace_extension(".json");
  return p;
}

ClassifierHandle load_classifier(const fs::path& source, std::optional<Task> expected_task) {
  require(fs::exists(source), ErrorCode::kNotFound, "classifier source " + source.string() + " not found");
  ClassifierHandle handle;
  if (source.extension() == ".onnx") {
    handle = load_model_file(source);
  } else {
    const auto bytes = read_file_bytes(source);
    const json desc = parse_json_file(source, bytes);
    const std::string backend = desc.value("backend", std::string());
    if (backend == "model_file") {
      reject_unknown_keys(desc, {"backend", "model"}, source.string());
      fs::path model = desc.at("model").get<std::string>();
      if (model.is_relative()) model = source.parent_path() / model;
      handle = load_model_file(model);
    } else if (backend == "lookup_table") {
      reject_unknown_keys(desc, {"backend", "task", "input_size", "expected_mpp", "fixture", "default_values"},
                          source.string());
      LookupOptions options;
      fs::path fixture;
      try {
        options.task = parse_task(desc.at("task").get<std::string>());
        options.input_size = desc.at("input_size").get<int>();
        options.expected_mpp = desc.at("expected_mpp").get<double>();
        if (desc.contains("default_values")) {
          options.default_values = desc["default_values"].get<std::vector<double>>();
        }
        fixture = desc.at("fixture").get<std::string>();
      } catch (const json::exception& e) {
        fail(ErrorCode::kInvalidInput, source.string() + ": " + e.what());
      }
      if (fixture.is_relative()) fixture = source.parent_path() / fixture;
      require(fs::exists(fixture), ErrorCode::kNotFound, "lookup fixture " + fixture.string() + " not found");
      const auto fixture_bytes = read_file_bytes(fixture);
      auto entries = parse_lookup_fixture(std::string(fixture_bytes.begin(), fixture_bytes.end()));
      std::vector<std::uint8_t> digest_input = bytes;
      digest_input.insert(digest_input.end(), fixture_bytes.begin(), fixture_bytes.end());
      handle = build_lookup(options, std::move(entries), source.string(), sha256_hex(digest_input));
    } else if (backend == "procedural_stub") {
      reject_unknown_keys(desc, {"backend", "task", "input_size", "expected_mpp", "stub", "normalization"},
                          source.string());
      try {
        const Task task = parse_task(desc.at("task").get<std::string>());
        handle = build_stub(task, desc.at("input_size").get<int>(), desc.at("expected_mpp").get<double>(),
                            parse_stub(desc.at("stub")),
                            parse_normalization(desc.value("normalization", std::string("none"))),
                            sha256_hex(bytes), source.string());
      } catch (const json::exception& e) {
        fail(ErrorCode::kInvalidInput, source.string() + ": " + e.what());
      }
    } else {
      fail(ErrorCode::kInvalidInput, source.string() + ": backend must be model_file, lookup_table or procedural_stub");
    }
  }
  if (expected_task && handle->task() != *expected_task) {
    fail(ErrorCode::kSchemaMismatch, source.string() + " classifies " +
                                         std::string(task_name(handle->task())) + ", expected " +
                                         std::string(task_name(*expected_task)));
  }
  return handle;
}

}  // namespace rccpath
