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

// Patch classifier abstraction.
//
// Every classifier is reached through an immutable, shareable handle whose
// predict() is safe to call from many threads. Three backends sit behind it:
//   model_file       ONNX network plus a JSON sidecar (same stem, .json)
//   lookup_table     probabilities keyed by patch origin (JSON lines)
//   procedural_stub  closed-form functions of the pixels, for tests
// Lookup and stub classifiers are described by a JSON descriptor file.

#ifndef RCCPATH_INFERENCE_H_
#define RCCPATH_INFERENCE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "rccpath/image.h"

namespace rccpath {

enum class Task { kTumor2, kSubtype3, kG4Binary, kGrade3 };

std::string_view task_name(Task task);
/// Throws InvalidInput on an unknown name.
Task parse_task(std::string_view name);

struct LabelSchema {
  Task task = Task::kTumor2;
  std::vector<std::string> labels;

  static LabelSchema for_task(Task task);
  std::size_t arity() const { return labels.size(); }
  /// Index of a label name; throws InvalidInput if absent.
  std::size_t index_of(std::string_view label) const;
};

struct LabelProbs {
  Task task = Task::kTumor2;
  std::vector<double> values;
  /// Set when the backend output drifted from a distribution and was repaired.
  bool renormalized = false;

  double operator[](std::size_t i) const { return values[i]; }
};

inline constexpr double kProbabilityTolerance = 1e-6;

/// Validates arity, range, and unit sum. Drift beyond the tolerance (but
/// within 1e-3) is clamped and renormalized with the flag set; anything
/// worse, or non-finite values, raise BackendError.
LabelProbs make_label_probs(Task task, std::vector<double> values);

/// Max-subtracted softmax. NaN input raises InvalidInput.
std::vector<double> softmax(std::span<const double> logits);

/// Index of the largest value, lowest index on ties.
std::size_t argmax_index(std::span<const double> values);
inline std::size_t argmax_label(const LabelProbs& probs) { return argmax_index(probs.values); }

enum class Backend { kModelFile, kLookupTable, kProceduralStub };
std::string_view backend_name(Backend backend);

enum class InputNormalization { kNone, kMacenko };

struct ClassifierInfo {
  LabelSchema schema;
  int input_size = 512;
  double expected_mpp = 0.5;
  Backend backend = Backend::kProceduralStub;
  InputNormalization normalization = InputNormalization::kNone;
  /// SHA-256 over the bytes the classifier was built from.
  std::string version;
  std::string source;
};

class Classifier {
 public:
  explicit Classifier(ClassifierInfo info) : info_(std::move(info)) {}
  virtual ~Classifier() = default;
  Classifier(const Classifier&) = delete;
  Classifier& operator=(const Classifier&) = delete;

  const ClassifierInfo& info() const { return info_; }
  Task task() const { return info_.schema.task; }

  /// Requires patch dims == input_size x input_size (InvalidInput otherwise).
  /// Backend faults surface as BackendError.
  LabelProbs predict(const Patch& patch) const;

  /// Probability of the positive class of a binary task.
  double positive_probability(const Patch& patch) const { return predict(patch).values.at(1); }

 protected:
  virtual std::vector<double> raw_predict(const Patch& patch) const = 0;

 private:
  ClassifierInfo info_;
};

using ClassifierHandle = std::shared_ptr<const Classifier>;

/// Key of the lookup backend: the patch origin.
struct LookupKey {
  int level = 0;
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend auto operator<=>(const LookupKey&, const LookupKey&) = default;
};

struct LookupEntry {
  LookupKey key;
  std::vector<double> values;
};

/// Parses lookup fixtures, one {level, x, y, values} object per line.
std::vector<LookupEntry> parse_lookup_fixture(const std::string& jsonl);
std::string format_lookup_fixture(std::span<const LookupEntry> entries);

struct LookupOptions {
  Task task = Task::kTumor2;
  int input_size = 512;
  double expected_mpp = 0.5;
  /// Returned for origins absent from the table; without it a miss is a
  /// BackendError.
  std::optional<std::vector<double>> default_values;
};

ClassifierHandle make_lookup_classifier(const LookupOptions& options,
                                        std::vector<LookupEntry> entries,
                                        std::string source = "<memory>");

enum class StubKind {
  kConstant,          // fixed vector
  kMeanRedThreshold,  // positive = high if mean(R)/255 >= threshold else low
  kMeanIntensity,     // positive = mean of all channel bytes / 255
  kLinearSoftmax,     // softmax(W * mean_rgb/255 + b)
};

struct StubSpec {
  StubKind kind = StubKind::kConstant;
  std::vector<double> values;               // kConstant
  double threshold = 0.5;                   // kMeanRedThreshold
  double low = 0.02;                        // kMeanRedThreshold
  double high = 0.98;                       // kMeanRedThreshold
  std::vector<std::vector<double>> weights; // kLinearSoftmax, arity x 3
  std::vector<double> bias;                 // kLinearSoftmax
};

ClassifierHandle make_stub_classifier(Task task, int input_size, double expected_mpp,
                                      StubSpec spec);

/// Loads a classifier from an .onnx model (sidecar required) or a JSON
/// descriptor. With expected_task set, a classifier for a different task is
/// a SchemaMismatch.
ClassifierHandle load_classifier(const std::filesystem::path& source,
                                 std::optional<Task> expected_task = std::nullopt);

/// Sidecar path convention for model files.
std::filesystem::path sidecar_path_for(const std::filesystem::path& model_path);

}  // namespace rccpath

#endif  // RCCPATH_INFERENCE_H_
