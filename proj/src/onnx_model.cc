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

#include "onnx_model.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include "onnx.pb.h"
#include "rccpath/error.h"

namespace rccpath::onnx_runtime {
namespace {

using Shape = std::vector<std::int64_t>;

[[noreturn]] void backend_fail(const std::string& message) {
  fail(ErrorCode::kBackendError, "onnx: " + message);
}

std::int64_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

Tensor float_tensor(Shape shape) {
  Tensor t;
  t.data.assign(static_cast<std::size_t>(product(shape)), 0.0f);
  t.shape = std::move(shape);
  return t;
}

Tensor from_proto(const onnx::TensorProto& proto) {
  Tensor t;
  t.shape.assign(proto.dims().begin(), proto.dims().end());
  const auto n = static_cast<std::size_t>(product(t.shape));
  const std::string& raw = proto.raw_data();
  switch (proto.data_type()) {
    case onnx::TensorProto::FLOAT:
      if (!raw.empty()) {
        if (raw.size() != n * sizeof(float)) backend_fail("initializer " + proto.name() + " has wrong size");
        t.data.resize(n);
        std::memcpy(t.data.data(), raw.data(), raw.size());
      } else {
        t.data.assign(proto.float_data().begin(), proto.float_data().end());
      }
      break;
    case onnx::TensorProto::DOUBLE:
      if (!raw.empty()) {
        if (raw.size() != n * sizeof(double)) backend_fail("initializer " + proto.name() + " has wrong size");
        std::vector<double> tmp(n);
        std::memcpy(tmp.data(), raw.data(), raw.size());
        t.data.assign(tmp.begin(), tmp.end());
      } else {
        t.data.assign(proto.double_data().begin(), proto.double_data().end());
      }
      break;
    case onnx::TensorProto::INT64:
      t.is_integer = true;
      if (!raw.empty()) {
        if (raw.size() != n * sizeof(std::int64_t)) backend_fail("initializer " + proto.name() + " has wrong size");
        t.ints.resize(n);
        std::memcpy(t.ints.data(), raw.data(), raw.size());
      } else {
        t.ints.assign(proto.int64_data().begin(), proto.int64_data().end());
      }
      break;
    case onnx::TensorProto::INT32:
      t.is_integer = true;
      if (!raw.empty()) {
        if (raw.size() != n * sizeof(std::int32_t)) backend_fail("initializer " + proto.name() + " has wrong size");
        std::vector<std::int32_t> tmp(n);
        std::memcpy(tmp.data(), raw.data(), raw.size());
        t.ints.assign(tmp.begin(), tmp.end());
      } else {
        t.ints.assign(proto.int32_data().begin(), proto.int32_data().end());
      }
      break;
    default:
      backend_fail("unsupported tensor data type " + std::to_string(proto.data_type()) +
                   " for " + proto.name());
  }
  const std::size_t stored = t.is_integer ? t.ints.size() : t.data.size();
  if (stored != n) backend_fail("initializer " + proto.name() + " element count mismatch");
  return t;
}

const onnx::AttributeProto* find_attr(const onnx::NodeProto& node, const std::string& name) {
  for (const auto& a : node.attribute()) {
    if (a.name() == name) return &a;
  }
  return nullptr;
}

std::int64_t attr_int(const onnx::NodeProto& node, const std::string& name, std::int64_t def) {
  const auto* a = find_attr(node, name);
  return a ? a->i() : def;
}

float attr_float(const onnx::NodeProto& node, const std::string& name, float def) {
  const auto* a = find_attr(node, name);
  return a ? a->f() : def;
}

Shape attr_ints(const onnx::NodeProto& node, const std::string& name, Shape def) {
  const auto* a = find_attr(node, name);
  if (!a) return def;
  return Shape(a->ints().begin(), a->ints().end());
}

void require_float(const Tensor& t, const std::string& op) {
  if (t.is_integer) backend_fail(op + " expects a float tensor");
}

// Numpy-style broadcasting of two shapes.
Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) backend_fail("shapes do not broadcast");
    out[i] = std::max(da, db);
  }
  return out;
}

// Strides of `shape` aligned to an output of rank `rank`; broadcast dims get 0.
std::vector<std::int64_t> broadcast_strides(const Shape& shape, std::size_t rank) {
  std::vector<std::int64_t> strides(rank, 0);
  std::int64_t stride = 1;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    const std::size_t src = shape.size() - 1 - k;
    const std::size_t dst = rank - 1 - k;
    strides[dst] = shape[src] == 1 ? 0 : stride;
    stride *= shape[src];
  }
  return strides;
}

Tensor binary_op(const Tensor& a, const Tensor& b, const std::function<float(float, float)>& f,
                 const std::string& op) {
  require_float(a, op);
  require_float(b, op);
  const Shape out_shape = broadcast_shape(a.shape, b.shape);
  Tensor out = float_tensor(out_shape);
  const std::size_t rank = out_shape.size();
  const auto sa = broadcast_strides(a.shape, rank);
  const auto sb = broadcast_strides(b.shape, rank);
  std::vector<std::int64_t> index(rank, 0);
  const std::int64_t n = out.numel();
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    out.data[static_cast<std::size_t>(i)] =
        f(a.data[static_cast<std::size_t>(ia)], b.data[static_cast<std::size_t>(ib)]);
    for (std::size_t d = rank; d-- > 0;) {
      ++index[d];
      ia += sa[d];
      ib += sb[d];
      if (index[d] < out_shape[d]) break;
      ia -= sa[d] * index[d];
      ib -= sb[d] * index[d];
      index[d] = 0;
    }
  }
  return out;
}

Tensor unary_op(const Tensor& x, const std::function<float(float)>& f, const std::string& op) {
  require_float(x, op);
  Tensor out = x;
  for (float& v : out.data) v = f(v);
  return out;
}

Tensor conv(const onnx::NodeProto& node, const Tensor& x, const Tensor& w, const Tensor* bias) {
  require_float(x, "Conv");
  require_float(w, "Conv");
  if (x.shape.size() != 4 || w.shape.size() != 4) backend_fail("Conv supports 2-D NCHW only");
  const std::string auto_pad = find_attr(node, "auto_pad") ? find_attr(node, "auto_pad")->s() : "NOTSET";
  if (auto_pad != "NOTSET" && auto_pad != "VALID") backend_fail("Conv auto_pad " + auto_pad + " unsupported");
  const std::int64_t group = attr_int(node, "group", 1);
  const Shape strides = attr_ints(node, "strides", {1, 1});
  const Shape dil = attr_ints(node, "dilations", {1, 1});
  const Shape pads = auto_pad == "VALID" ? Shape{0, 0, 0, 0} : attr_ints(node, "pads", {0, 0, 0, 0});
  const std::int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const std::int64_t m = w.shape[0], cg = w.shape[1], kh = w.shape[2], kw = w.shape[3];
  if (cg * group != c || m % group != 0) backend_fail("Conv channel/group mismatch");
  const std::int64_t oh = (h + pads[0] + pads[2] - dil[0] * (kh - 1) - 1) / strides[0] + 1;
  const std::int64_t ow = (wd + pads[1] + pads[3] - dil[1] * (kw - 1) - 1) / strides[1] + 1;
  if (oh <= 0 || ow <= 0) backend_fail("Conv output is empty");
  Tensor out = float_tensor({n, m, oh, ow});
  const std::int64_t mg = m / group;
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t oc = 0; oc < m; ++oc) {
      const std::int64_t g = oc / mg;
      const float b0 = bias ? bias->data[static_cast<std::size_t>(oc)] : 0.0f;
      float* dst = out.data.data() + ((b * m + oc) * oh) * ow;
      for (std::int64_t i = 0; i < oh * ow; ++i) dst[i] = b0;
      for (std::int64_t ic = 0; ic < cg; ++ic) {
        const float* src = x.data.data() + ((b * c + g * cg + ic) * h) * wd;
        const float* ker = w.data.data() + ((oc * cg + ic) * kh) * kw;
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            const float kv = ker[ky * kw + kx];
            for (std::int64_t oy = 0; oy < oh; ++oy) {
              const std::int64_t iy = oy * strides[0] - pads[0] + ky * dil[0];
              if (iy < 0 || iy >= h) continue;
              for (std::int64_t ox = 0; ox < ow; ++ox) {
                const std::int64_t ix = ox * strides[1] - pads[1] + kx * dil[1];
                if (ix < 0 || ix >= wd) continue;
                dst[oy * ow + ox] += kv * src[iy * wd + ix];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor pool(const onnx::NodeProto& node, const Tensor& x, bool is_max) {
  require_float(x, node.op_type());
  if (x.shape.size() != 4) backend_fail(node.op_type() + " supports NCHW only");
  if (attr_int(node, "ceil_mode", 0) != 0) backend_fail(node.op_type() + " ceil_mode unsupported");
  const Shape k = attr_ints(node, "kernel_shape", {});
  if (k.size() != 2) backend_fail(node.op_type() + " needs a 2-D kernel_shape");
  const Shape strides = attr_ints(node, "strides", {1, 1});
  const Shape pads = attr_ints(node, "pads", {0, 0, 0, 0});
  const bool include_pad = attr_int(node, "count_include_pad", 0) != 0;
  const std::int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  const std::int64_t oh = (h + pads[0] + pads[2] - k[0]) / strides[0] + 1;
  const std::int64_t ow = (w + pads[1] + pads[3] - k[1]) / strides[1] + 1;
  Tensor out = float_tensor({n, c, oh, ow});
  for (std::int64_t p = 0; p < n * c; ++p) {
    const float* src = x.data.data() + p * h * w;
    float* dst = out.data.data() + p * oh * ow;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        float acc = is_max ? -std::numeric_limits<float>::infinity() : 0.0f;
        std::int64_t count = 0;
        for (std::int64_t ky = 0; ky < k[0]; ++ky) {
          const std::int64_t iy = oy * strides[0] - pads[0] + ky;
          for (std::int64_t kx = 0; kx < k[1]; ++kx) {
            const std::int64_t ix = ox * strides[1] - pads[1] + kx;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
              if (include_pad) ++count;
              continue;
            }
            const float v = src[iy * w + ix];
            acc = is_max ? std::max(acc, v) : acc + v;
            ++count;
          }
        }
        dst[oy * ow + ox] = is_max ? acc : (count ? acc / static_cast<float>(count) : 0.0f);
      }
    }
  }
  return out;
}

Tensor global_pool(const Tensor& x, bool is_max) {
  require_float(x, "GlobalPool");
  if (x.shape.size() < 3) backend_fail("global pooling needs spatial dims");
  const std::int64_t n = x.shape[0], c = x.shape[1];
  const std::int64_t spatial = x.numel() / (n * c);
  Shape shape = {n, c};
  for (std::size_t i = 2; i < x.shape.size(); ++i) shape.push_back(1);
  Tensor out = float_tensor(shape);
  for (std::int64_t p = 0; p < n * c; ++p) {
    const float* src = x.data.data() + p * spatial;
    if (is_max) {
      out.data[static_cast<std::size_t>(p)] = *std::max_element(src, src + spatial);
    } else {
      double acc = 0.0;
      for (std::int64_t i = 0; i < spatial; ++i) acc += src[i];
      out.data[static_cast<std::size_t>(p)] = static_cast<float>(acc / static_cast<double>(spatial));
    }
  }
  return out;
}

Tensor gemm(const onnx::NodeProto& node, const Tensor& a, const Tensor& b, const Tensor* c) {
  require_float(a, "Gemm");
  require_float(b, "Gemm");
  if (a.shape.size() != 2 || b.shape.size() != 2) backend_fail("Gemm expects 2-D operands");
  const bool ta = attr_int(node, "transA", 0) != 0;
  const bool tb = attr_int(node, "transB", 0) != 0;
  const float alpha = attr_float(node, "alpha", 1.0f);
  const float beta = attr_float(node, "beta", 1.0f);
  const std::int64_t m = ta ? a.shape[1] : a.shape[0];
  const std::int64_t k = ta ? a.shape[0] : a.shape[1];
  const std::int64_t kb = tb ? b.shape[1] : b.shape[0];
  const std::int64_t n = tb ? b.shape[0] : b.shape[1];
  if (k != kb) backend_fail("Gemm inner dimensions differ");
  Tensor out = float_tensor({m, n});
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) {
        const float av = ta ? a.data[static_cast<std::size_t>(p * m + i)] : a.data[static_cast<std::size_t>(i * k + p)];
        const float bv = tb ? b.data[static_cast<std::size_t>(j * k + p)] : b.data[static_cast<std::size_t>(p * n + j)];
        acc += static_cast<double>(av) * bv;
      }
      out.data[static_cast<std::size_t>(i * n + j)] = alpha * static_cast<float>(acc);
    }
  }
  if (c) {
    const Tensor scaled = unary_op(*c, [beta](float v) { return beta * v; }, "Gemm");
    out = binary_op(out, scaled, std::plus<float>(), "Gemm");
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_float(a, "MatMul");
  require_float(b, "MatMul");
  if (a.shape.size() != 2 || b.shape.size() != 2) backend_fail("MatMul supports 2-D operands only");
  if (a.shape[1] != b.shape[0]) backend_fail("MatMul inner dimensions differ");
  const std::int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor out = float_tensor({m, n});
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) {
        acc += static_cast<double>(a.data[static_cast<std::size_t>(i * k + p)]) *
               b.data[static_cast<std::size_t>(p * n + j)];
      }
      out.data[static_cast<std::size_t>(i * n + j)] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor softmax_op(const onnx::NodeProto& node, const Tensor& x, std::int64_t opset) {
  require_float(x, "Softmax");
  const std::int64_t rank = static_cast<std::int64_t>(x.shape.size());
  std::int64_t axis = attr_int(node, "axis", opset >= 13 ? -1 : 1);
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) backend_fail("Softmax axis out of range");
  // Before opset 13 the input is coerced to 2-D at `axis`; from 13 on the
  // reduction runs along that one axis.
  std::int64_t outer = 1, inner = 1, len = 1;
  if (opset >= 13) {
    for (std::int64_t i = 0; i < axis; ++i) outer *= x.shape[static_cast<std::size_t>(i)];
    len = x.shape[static_cast<std::size_t>(axis)];
    for (std::int64_t i = axis + 1; i < rank; ++i) inner *= x.shape[static_cast<std::size_t>(i)];
  } else {
    for (std::int64_t i = 0; i < axis; ++i) outer *= x.shape[static_cast<std::size_t>(i)];
    for (std::int64_t i = axis; i < rank; ++i) len *= x.shape[static_cast<std::size_t>(i)];
  }
  Tensor out = x;
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      auto at = [&](std::int64_t j) -> float& {
        return out.data[static_cast<std::size_t>((o * len + j) * inner + in)];
      };
      float mx = -std::numeric_limits<float>::infinity();
      for (std::int64_t j = 0; j < len; ++j) mx = std::max(mx, at(j));
      double sum = 0.0;
      for (std::int64_t j = 0; j < len; ++j) {
        at(j) = std::exp(at(j) - mx);
        sum += at(j);
      }
      for (std::int64_t j = 0; j < len; ++j) at(j) = static_cast<float>(at(j) / sum);
    }
  }
  return out;
}

Tensor batch_norm(const onnx::NodeProto& node, const Tensor& x, const Tensor& scale,
                  const Tensor& bias, const Tensor& mean, const Tensor& var) {
  require_float(x, "BatchNormalization");
  if (x.shape.size() < 2) backend_fail("BatchNormalization needs a channel axis");
  const float eps = attr_float(node, "epsilon", 1e-5f);
  const std::int64_t n = x.shape[0], c = x.shape[1];
  const std::int64_t spatial = x.numel() / (n * c);
  Tensor out = x;
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const auto k = static_cast<std::size_t>(ch);
      const float s = scale.data[k] / std::sqrt(var.data[k] + eps);
      const float t = bias.data[k] - mean.data[k] * s;
      float* p = out.data.data() + (b * c + ch) * spatial;
      for (std::int64_t i = 0; i < spatial; ++i) p[i] = p[i] * s + t;
    }
  }
  return out;
}

Tensor reshape(const Tensor& x, const Tensor& shape_tensor, bool allow_zero) {
  if (!shape_tensor.is_integer) backend_fail("Reshape target must be an integer tensor");
  Shape shape = shape_tensor.ints;
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0 && !allow_zero) shape[i] = x.shape.at(i);
    if (shape[i] == -1) {
      if (infer >= 0) backend_fail("Reshape has more than one -1");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) shape[static_cast<std::size_t>(infer)] = known ? x.numel() / known : 0;
  if (product(shape) != x.numel()) backend_fail("Reshape changes the element count");
  Tensor out = x;
  out.shape = std::move(shape);
  return out;
}

Tensor flatten(const onnx::NodeProto& node, const Tensor& x) {
  std::int64_t axis = attr_int(node, "axis", 1);
  if (axis < 0) axis += static_cast<std::int64_t>(x.shape.size());
  std::int64_t outer = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= x.shape[static_cast<std::size_t>(i)];
  Tensor out = x;
  out.shape = {outer, x.numel() / std::max<std::int64_t>(outer, 1)};
  return out;
}

const std::set<std::string>& supported_ops() {
  static const std::set<std::string> ops = {
      "Conv", "Relu", "LeakyRelu", "Sigmoid", "Tanh", "MaxPool", "AveragePool",
      "GlobalAveragePool", "GlobalMaxPool", "Flatten", "Reshape", "Gemm", "MatMul",
      "Add", "Sub", "Mul", "Div", "Softmax", "BatchNormalization", "Identity",
      "Dropout", "Constant"};
  return ops;
}

}  // namespace

std::int64_t Tensor::numel() const { return product(shape); }

OnnxModel::OnnxModel() : model_(std::make_unique<onnx::ModelProto>()) {}
OnnxModel::~OnnxModel() = default;

std::shared_ptr<const OnnxModel> OnnxModel::load(std::span<const std::uint8_t> bytes) {
  std::shared_ptr<OnnxModel> m(new OnnxModel());
  if (!m->model_->ParseFromArray(bytes.data(), static_cast<int>(bytes.size()))) {
    backend_fail("cannot parse model protobuf");
  }
  const onnx::GraphProto& graph = m->model_->graph();
  for (const auto& init : graph.initializer()) m->initializers_[init.name()] = from_proto(init);
  for (const auto& node : graph.node()) {
    if (!node.domain().empty() && node.domain() != "ai.onnx") {
      backend_fail("operator domain " + node.domain() + " unsupported");
    }
    if (!supported_ops().count(node.op_type())) backend_fail("operator " + node.op_type() + " unsupported");
  }
  for (const auto& input : graph.input()) {
    if (m->initializers_.count(input.name())) continue;
    if (!m->input_name_.empty()) backend_fail("model has more than one runtime input");
    m->input_name_ = input.name();
    for (const auto& d : input.type().tensor_type().shape().dim()) {
      m->input_shape_.push_back(d.has_dim_value() ? d.dim_value() : -1);
    }
  }
  if (m->input_name_.empty()) backend_fail("model has no runtime input");
  if (graph.output_size() < 1) backend_fail("model has no outputs");
  m->output_name_ = graph.output(0).name();
  const auto& out_dims = graph.output(0).type().tensor_type().shape().dim();
  if (out_dims.size() > 0 && out_dims[out_dims.size() - 1].has_dim_value()) {
    m->output_classes_ = out_dims[out_dims.size() - 1].dim_value();
  }
  return m;
}

Tensor OnnxModel::run(const Tensor& input) const {
  const onnx::GraphProto& graph = model_->graph();
  std::int64_t opset = 13;
  for (const auto& op : model_->opset_import()) {
    if (op.domain().empty() || op.domain() == "ai.onnx") opset = op.version();
  }

  std::map<std::string, Tensor> values;
  values[input_name_] = input;
  auto get = [&](const std::string& name) -> const Tensor& {
    if (auto it = values.find(name); it != values.end()) return it->second;
    if (auto it = initializers_.find(name); it != initializers_.end()) return it->second;
    backend_fail("tensor " + name + " is undefined");
  };
  auto optional_input = [&](const onnx::NodeProto& node, int i) -> const Tensor* {
    if (node.input_size() <= i || node.input(i).empty()) return nullptr;
    return &get(node.input(i));
  };

  for (const auto& node : graph.node()) {
    const std::string& op = node.op_type();
    auto in = [&](int i) -> const Tensor& {
      if (node.input_size() <= i) backend_fail(op + " is missing input " + std::to_string(i));
      return get(node.input(i));
    };
    Tensor out;
    if (op == "Conv") {
      out = conv(node, in(0), in(1), optional_input(node, 2));
    } else if (op == "Relu") {
      out = unary_op(in(0), [](float v) { return v > 0.0f ? v : 0.0f; }, op);
    } else if (op == "LeakyRelu") {
      const float alpha = attr_float(node, "alpha", 0.01f);
      out = unary_op(in(0), [alpha](float v) { return v > 0.0f ? v : alpha * v; }, op);
    } else if (op == "Sigmoid") {
      out = unary_op(in(0), [](float v) { return 1.0f / (1.0f + std::exp(-v)); }, op);
    } else if (op == "Tanh") {
      out = unary_op(in(0), [](float v) { return std::tanh(v); }, op);
    } else if (op == "MaxPool" || op == "AveragePool") {
      out = pool(node, in(0), op == "MaxPool");
    } else if (op == "GlobalAveragePool" || op == "GlobalMaxPool") {
      out = global_pool(in(0), op == "GlobalMaxPool");
    } else if (op == "Flatten") {
      out = flatten(node, in(0));
    } else if (op == "Reshape") {
      out = reshape(in(0), in(1), attr_int(node, "allowzero", 0) != 0);
    } else if (op == "Gemm") {
      out = gemm(node, in(0), in(1), optional_input(node, 2));
    } else if (op == "MatMul") {
      out = matmul(in(0), in(1));
    } else if (op == "Add") {
      out = binary_op(in(0), in(1), std::plus<float>(), op);
    } else if (op == "Sub") {
      out = binary_op(in(0), in(1), std::minus<float>(), op);
    } else if (op == "Mul") {
      out = binary_op(in(0), in(1), std::multiplies<float>(), op);
    } else if (op == "Div") {
      out = binary_op(in(0), in(1), std::divides<float>(), op);
    } else if (op == "Softmax") {
      out = softmax_op(node, in(0), opset);
    } else if (op == "BatchNormalization") {
      out = batch_norm(node, in(0), in(1), in(2), in(3), in(4));
    } else if (op == "Identity" || op == "Dropout") {
      out = in(0);
    } else if (op == "Constant") {
      const auto* value = find_attr(node, "value");
      if (!value || !value->has_t()) backend_fail("Constant without a tensor value");
      out = from_proto(value->t());
    } else {
      backend_fail("operator " + op + " unsupported");
    }
    if (node.output_size() < 1) backend_fail(op + " has no outputs");
    values[node.output(0)] = std::move(out);
  }
  return get(output_name_);
}

}  // namespace rccpath::onnx_runtime
