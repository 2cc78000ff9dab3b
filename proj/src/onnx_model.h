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

// Minimal ONNX graph interpreter for small feed-forward image classifiers.
// Supports float tensors and the operator subset that toy CNN exports use.

#ifndef RCCPATH_SRC_ONNX_MODEL_H_
#define RCCPATH_SRC_ONNX_MODEL_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace onnx {
class GraphProto;
class ModelProto;
}  // namespace onnx

namespace rccpath::onnx_runtime {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;
  /// Integer payload for shape-like tensors (Reshape targets and friends).
  std::vector<std::int64_t> ints;
  bool is_integer = false;

  std::int64_t numel() const;
};

class OnnxModel {
 public:
  /// Parses and validates a serialized ModelProto; throws BackendError.
  static std::shared_ptr<const OnnxModel> load(std::span<const std::uint8_t> bytes);
  ~OnnxModel();

  /// Runs the graph on an NCHW float input and returns the first output.
  Tensor run(const Tensor& input) const;

  const std::string& input_name() const { return input_name_; }
  /// Declared dims of the input (-1 where symbolic).
  const std::vector<std::int64_t>& input_shape() const { return input_shape_; }
  /// Static size of the output's last dimension, when declared.
  std::optional<std::int64_t> output_classes() const { return output_classes_; }

 private:
  OnnxModel();
  std::unique_ptr<onnx::ModelProto> model_;
  std::map<std::string, Tensor> initializers_;
  std::string input_name_;
  std::string output_name_;
  std::vector<std::int64_t> input_shape_;
  std::optional<std::int64_t> output_classes_;
};

}  // namespace rccpath::onnx_runtime

#endif  // RCCPATH_SRC_ONNX_MODEL_H_
