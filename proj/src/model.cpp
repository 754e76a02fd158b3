/* Copyright 2026 The sensireg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "sensireg/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"
#include "sensireg/error.hpp"

namespace sensireg {
namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'S', 'R', 'E', 'G'};
constexpr uint32_t kFormatVersion = 1;

double RoundToFloat(double v) { return static_cast<double>(static_cast<float>(v)); }

const char* KindName(LayerKind k) {
  switch (k) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kReLU: return "relu";
    case LayerKind::kConv2D: return "conv2d";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

LayerKind KindFromName(const std::string& s) {
  if (s == "dense") return LayerKind::kDense;
  if (s == "relu") return LayerKind::kReLU;
  if (s == "conv2d") return LayerKind::kConv2D;
  if (s == "flatten") return LayerKind::kFlatten;
  Fail(ErrorCode::kCorruptFile, "unknown layer kind '" + s + "'");
}

// Parameter shapes of a layer, in declaration order (weight, bias).
std::vector<Shape> ParamShapes(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::kDense: return {{l.in, l.out}, {l.out}};
    case LayerKind::kConv2D:
      return {{l.filters, l.channels_in, l.kernel_h, l.kernel_w}, {l.filters}};
    default: return {};
  }
}

std::size_t FanIn(const LayerSpec& l) {
  return l.kind == LayerKind::kDense ? l.in
                                     : l.channels_in * l.kernel_h * l.kernel_w;
}

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t GetU32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

LayerSpec LayerSpec::Dense(std::string id, std::size_t in, std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.id = std::move(id);
  l.in = in;
  l.out = out;
  return l;
}

LayerSpec LayerSpec::ReLU(std::string id) {
  LayerSpec l;
  l.kind = LayerKind::kReLU;
  l.id = std::move(id);
  return l;
}

LayerSpec LayerSpec::Conv2D(std::string id, std::size_t channels_in,
                            std::size_t filters, std::size_t kernel_h,
                            std::size_t kernel_w) {
  LayerSpec l;
  l.kind = LayerKind::kConv2D;
  l.id = std::move(id);
  l.channels_in = channels_in;
  l.filters = filters;
  l.kernel_h = kernel_h;
  l.kernel_w = kernel_w;
  return l;
}

LayerSpec LayerSpec::Flatten(std::string id) {
  LayerSpec l;
  l.kind = LayerKind::kFlatten;
  l.id = std::move(id);
  return l;
}

std::vector<Shape> Architecture::Validate() const {
  Require(!input_shape.empty() && NumElements(input_shape) > 0,
          "architecture: input shape must be non-empty");
  Require(!layers.empty(), "architecture: no layers");
  Require(num_classes >= 1, "architecture: num_classes must be positive");
  std::set<std::string> ids;
  std::vector<Shape> shapes;
  Shape cur = input_shape;
  for (const LayerSpec& l : layers) {
    if (l.id.empty() || l.id == kLogitsId)
      Fail(ErrorCode::kInvalidArgument, "architecture: invalid layer id '" + l.id + "'");
    if (!ids.insert(l.id).second)
      Fail(ErrorCode::kInvalidArgument, "architecture: duplicate layer id '" + l.id + "'");
    const std::string where = "architecture: layer '" + l.id + "' ";
    switch (l.kind) {
      case LayerKind::kDense:
        if (!(cur.size() == 1 && cur[0] == l.in && l.out > 0))
          Fail(ErrorCode::kShapeMismatch,
               where + "expects input [" + std::to_string(l.in) + "], got " + ShapeToString(cur));
        cur = {l.out};
        break;
      case LayerKind::kReLU:
        break;
      case LayerKind::kConv2D:
        if (!(cur.size() == 3 && cur[0] == l.channels_in && l.filters > 0 && l.kernel_h >= 1 &&
              l.kernel_w >= 1 && l.kernel_h <= cur[1] && l.kernel_w <= cur[2]))
          Fail(ErrorCode::kShapeMismatch, where + "cannot consume " + ShapeToString(cur));
        cur = {l.filters, cur[1] - l.kernel_h + 1, cur[2] - l.kernel_w + 1};
        break;
      case LayerKind::kFlatten:
        cur = {NumElements(cur)};
        break;
    }
    shapes.push_back(cur);
  }
  if (!(cur.size() == 1 && cur[0] == num_classes))
    Fail(ErrorCode::kShapeMismatch,
         "architecture: final output " + ShapeToString(cur) + " does not match num_classes " +
             std::to_string(num_classes));
  return shapes;
}

std::string Architecture::ToDescriptor() const {
  json j;
  j["input_shape"] = input_shape;
  j["num_classes"] = num_classes;
  j["layers"] = json::array();
  for (const LayerSpec& l : layers) {
    json lj{{"kind", KindName(l.kind)}, {"id", l.id}};
    if (l.kind == LayerKind::kDense) {
      lj["in"] = l.in;
      lj["out"] = l.out;
    } else if (l.kind == LayerKind::kConv2D) {
      lj["channels_in"] = l.channels_in;
      lj["filters"] = l.filters;
      lj["kernel_h"] = l.kernel_h;
      lj["kernel_w"] = l.kernel_w;
    }
    j["layers"].push_back(lj);
  }
  return j.dump();
}

Architecture Architecture::FromDescriptor(const std::string& descriptor) {
  Architecture a;
  try {
    const json j = json::parse(descriptor);
    a.input_shape = j.at("input_shape").get<Shape>();
    a.num_classes = j.at("num_classes").get<std::size_t>();
    for (const json& lj : j.at("layers")) {
      LayerSpec l;
      l.kind = KindFromName(lj.at("kind").get<std::string>());
      l.id = lj.at("id").get<std::string>();
      if (l.kind == LayerKind::kDense) {
        l.in = lj.at("in").get<std::size_t>();
        l.out = lj.at("out").get<std::size_t>();
      } else if (l.kind == LayerKind::kConv2D) {
        l.channels_in = lj.at("channels_in").get<std::size_t>();
        l.filters = lj.at("filters").get<std::size_t>();
        l.kernel_h = lj.at("kernel_h").get<std::size_t>();
        l.kernel_w = lj.at("kernel_w").get<std::size_t>();
      }
      a.layers.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    Fail(ErrorCode::kCorruptFile,
         std::string("malformed architecture descriptor: ") + e.what());
  }
  return a;
}

Architecture MlpArchitecture(std::size_t input_dim,
                             const std::vector<std::size_t>& hidden,
                             std::size_t num_classes) {
  Architecture a;
  a.input_shape = {input_dim};
  a.num_classes = num_classes;
  std::size_t width = input_dim;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    a.layers.push_back(LayerSpec::Dense("dense" + std::to_string(i), width, hidden[i]));
    a.layers.push_back(LayerSpec::ReLU("relu" + std::to_string(i)));
    width = hidden[i];
  }
  a.layers.push_back(LayerSpec::Dense("output", width, num_classes));
  return a;
}

Architecture CnnArchitecture(const Shape& input_shape,
                             const std::vector<std::size_t>& conv_filters,
                             std::size_t kernel,
                             const std::vector<std::size_t>& hidden,
                             std::size_t num_classes) {
  Require(input_shape.size() == 3, "cnn: input shape must be [C,H,W]");
  Architecture a;
  a.input_shape = input_shape;
  a.num_classes = num_classes;
  std::size_t channels = input_shape[0];
  std::size_t h = input_shape[1], w = input_shape[2];
  for (std::size_t i = 0; i < conv_filters.size(); ++i) {
    a.layers.push_back(LayerSpec::Conv2D("conv" + std::to_string(i), channels,
                                         conv_filters[i], kernel, kernel));
    a.layers.push_back(LayerSpec::ReLU("conv_relu" + std::to_string(i)));
    channels = conv_filters[i];
    h = h - kernel + 1;
    w = w - kernel + 1;
  }
  a.layers.push_back(LayerSpec::Flatten("flatten"));
  std::size_t width = channels * h * w;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    a.layers.push_back(LayerSpec::Dense("dense" + std::to_string(i), width, hidden[i]));
    a.layers.push_back(LayerSpec::ReLU("relu" + std::to_string(i)));
    width = hidden[i];
  }
  a.layers.push_back(LayerSpec::Dense("output", width, num_classes));
  return a;
}

Model::Model(Architecture arch, std::vector<Shape> shapes,
             std::vector<NamedParameter> params)
    : arch_(std::move(arch)),
      layer_shapes_(std::move(shapes)),
      params_(std::move(params)) {
  int offset = 0;
  for (const LayerSpec& l : arch_.layers) {
    const auto ps = ParamShapes(l);
    param_offset_.push_back(ps.empty() ? -1 : offset);
    offset += static_cast<int>(ps.size());
  }
}

Model Model::Init(const Architecture& arch, Rng& rng) {
  auto shapes = arch.Validate();
  std::vector<NamedParameter> params;
  for (const LayerSpec& l : arch.layers) {
    const auto ps = ParamShapes(l);
    if (ps.empty()) continue;
    const double stddev = std::sqrt(2.0 / static_cast<double>(FanIn(l)));
    std::vector<double> w(NumElements(ps[0]));
    for (double& v : w) v = RoundToFloat(stddev * rng.Normal());
    params.push_back({l.id + ".weight", Tensor::FromData(ps[0], std::move(w))});
    params.push_back({l.id + ".bias", Tensor::Zeros(ps[1])});
  }
  return Model(arch, std::move(shapes), std::move(params));
}

Model Model::FromParameters(const Architecture& arch,
                            const std::vector<std::vector<double>>& values) {
  auto shapes = arch.Validate();
  std::vector<NamedParameter> params;
  std::size_t k = 0;
  for (const LayerSpec& l : arch.layers) {
    const auto ps = ParamShapes(l);
    const char* names[2] = {".weight", ".bias"};
    for (std::size_t i = 0; i < ps.size(); ++i, ++k) {
      if (!(k < values.size() && values[k].size() == NumElements(ps[i])))
        Fail(ErrorCode::kShapeMismatch,
             "parameter " + l.id + names[i] + " expects " + ShapeToString(ps[i]));
      std::vector<double> v(values[k]);
      for (double& x : v) x = RoundToFloat(x);
      params.push_back({l.id + names[i], Tensor::FromData(ps[i], std::move(v))});
    }
  }
  Require(k == values.size(), "too many parameter tensors supplied",
          ErrorCode::kShapeMismatch);
  return Model(arch, std::move(shapes), std::move(params));
}

std::vector<std::string> Model::ReluLayerIds() const {
  std::vector<std::string> ids;
  for (const LayerSpec& l : arch_.layers)
    if (l.kind == LayerKind::kReLU) ids.push_back(l.id);
  return ids;
}

std::size_t Model::LayerWidth(const std::string& layer_id) const {
  if (layer_id == kLogitsId) return arch_.num_classes;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i)
    if (arch_.layers[i].id == layer_id) return NumElements(layer_shapes_[i]);
  Fail(ErrorCode::kInvalidArgument, "unknown layer id '" + layer_id + "'");
}

ForwardResult Model::Forward(const Tensor& batch,
                             const std::set<std::string>& record,
                             const std::vector<Tensor>* bound) const {
  for (const std::string& id : record) {
    if (id == kLogitsId) continue;
    const bool known = std::any_of(arch_.layers.begin(), arch_.layers.end(),
                                   [&](const LayerSpec& l) { return l.id == id; });
    if (!known)
      Fail(ErrorCode::kInvalidArgument, "forward: unknown layer id '" + id + "' in record request");
  }
  if (!(batch.rank() >= 1 && batch.numel() == batch.dim(0) * input_size()))
    Fail(ErrorCode::kShapeMismatch,
         "forward: batch " + ShapeToString(batch.shape()) + " does not match input shape " +
             ShapeToString(arch_.input_shape));
  if (bound != nullptr)
    Require(bound->size() == params_.size(), "forward: bound parameter count mismatch",
            ErrorCode::kShapeMismatch);
  const std::size_t B = batch.dim(0);
  auto param = [&](int idx) -> const Tensor& {
    return bound ? (*bound)[idx] : params_[idx].value;
  };

  Shape s{B};
  s.insert(s.end(), arch_.input_shape.begin(), arch_.input_shape.end());
  Tensor x = batch.shape() == s ? batch : Reshape(batch, s);
  ForwardResult result;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const LayerSpec& l = arch_.layers[i];
    switch (l.kind) {
      case LayerKind::kDense:
        x = AddRowBias(MatMul(x, param(param_offset_[i])), param(param_offset_[i] + 1));
        break;
      case LayerKind::kConv2D:
        x = AddChannelBias(Conv2D(x, param(param_offset_[i])),
                           param(param_offset_[i] + 1));
        break;
      case LayerKind::kReLU:
        x = Relu(x);
        break;
      case LayerKind::kFlatten:
        x = Reshape(x, {B, x.numel() / B});
        break;
    }
    if (record.count(l.id)) {
      result.record.per_layer[l.id] =
          x.rank() == 2 ? x : Reshape(x, {B, x.numel() / B});
    }
  }
  result.logits = x;
  result.record.per_layer[kLogitsId] = x;
  return result;
}

Tensor Model::Logits(const Tensor& batch, const std::vector<Tensor>* bound) const {
  return Forward(batch, {}, bound).logits;
}

std::vector<int> Model::PredictLabels(const Tensor& batch) const {
  const Tensor z = Logits(batch);
  const std::size_t B = z.dim(0), C = z.dim(1);
  std::vector<int> out(B);
  const auto d = z.data();
  for (std::size_t i = 0; i < B; ++i) {
    const double* row = &d[i * C];
    out[i] = static_cast<int>(std::max_element(row, row + C) - row);
  }
  return out;
}

int Model::Predict(std::span<const double> x) const {
  const auto z = SampleLogits(x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<Tensor> Model::TrainableCopies() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value.Detach(true));
  return out;
}

void Model::SetParameters(const std::vector<std::vector<double>>& values) {
  Require(values.size() == params_.size(), "set_parameters: count mismatch",
          ErrorCode::kShapeMismatch);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!(values[i].size() == params_[i].value.numel()))
      Fail(ErrorCode::kShapeMismatch, "set_parameters: size mismatch for " + params_[i].name);
    std::vector<double> v(values[i]);
    for (double& x : v) x = RoundToFloat(x);
    params_[i].value = Tensor::FromData(params_[i].value.shape(), std::move(v));
  }
}

std::vector<double> Model::SampleLogits(std::span<const double> x) const {
  Require(x.size() == input_size(), "sample size does not match model input",
          ErrorCode::kShapeMismatch);
  const Tensor z = Logits(Tensor::FromData({1, x.size()}, {x.begin(), x.end()}));
  return {z.data().begin(), z.data().end()};
}

std::vector<double> Model::SampleVjp(std::span<const double> x, const SeedFn& seed,
                                     std::vector<double>& input_grad) const {
  Require(x.size() == input_size(), "sample size does not match model input",
          ErrorCode::kShapeMismatch);
  const Tensor input =
      Tensor::FromData({1, x.size()}, {x.begin(), x.end()}, /*requires_grad=*/true);
  const Tensor z = Logits(input);
  std::vector<double> logits(z.data().begin(), z.data().end());
  const std::vector<double> s = seed(logits);
  input_grad = BackwardWithSeed(z, s).ValuesOf(input);
  return logits;
}

void SaveModel(const Model& model, const std::filesystem::path& path) {
  std::string buf(kMagic, 4);
  PutU32(buf, kFormatVersion);
  const std::string desc = model.architecture().ToDescriptor();
  PutU32(buf, static_cast<uint32_t>(desc.size()));
  buf += desc;
  for (const auto& p : model.parameters())
    for (double v : p.value.data())
      PutU32(buf, std::bit_cast<uint32_t>(static_cast<float>(v)));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!(static_cast<bool>(f)))
    Fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!(static_cast<bool>(f)))
    Fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

Model LoadModel(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!(static_cast<bool>(f)))
    Fail(ErrorCode::kIo, "cannot open model file '" + path.string() + "'");
  const std::string buf((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const std::string where = "model file '" + path.string() + "': ";
  if (!(buf.size() >= 12))
    Fail(ErrorCode::kCorruptFile, where + "truncated header");
  if (!(std::memcmp(buf.data(), kMagic, 4) == 0))
    Fail(ErrorCode::kCorruptFile, where + "bad magic (expected SREG)");
  const uint32_t version = GetU32(p + 4);
  if (!(version == kFormatVersion))
    Fail(ErrorCode::kVersionMismatch,
         where + "unsupported format version " + std::to_string(version) + " (expected " +
             std::to_string(kFormatVersion) + ")");
  const uint32_t desc_len = GetU32(p + 8);
  if (!(buf.size() >= 12 + static_cast<std::size_t>(desc_len)))
    Fail(ErrorCode::kCorruptFile, where + "truncated architecture descriptor");
  const Architecture arch =
      Architecture::FromDescriptor(buf.substr(12, desc_len));
  try {
    arch.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kCorruptFile, where + e.what());
  }
  std::vector<std::vector<double>> values;
  std::size_t pos = 12 + desc_len;
  for (const LayerSpec& l : arch.layers) {
    for (const Shape& s : ParamShapes(l)) {
      const std::size_t n = NumElements(s);
      if (!(buf.size() - pos >= 4 * n))
        Fail(ErrorCode::kCorruptFile, where + "truncated parameter payload");
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i, pos += 4)
        v[i] = static_cast<double>(std::bit_cast<float>(GetU32(p + pos)));
      values.push_back(std::move(v));
    }
  }
  if (!(pos == buf.size()))
    Fail(ErrorCode::kCorruptFile, where + "trailing bytes after parameters");
  return Model::FromParameters(arch, values);
}

double Accuracy(const Model& model, const Tensor& inputs,
                std::span<const int> labels) {
  const std::size_t n = labels.size();
  Require(n > 0 && inputs.dim(0) == n, "accuracy: inputs/labels mismatch",
          ErrorCode::kShapeMismatch);
  constexpr std::size_t kChunk = 256;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    const auto pred = model.PredictLabels(SliceRows(inputs, begin, end));
    for (std::size_t i = begin; i < end; ++i) correct += pred[i - begin] == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace sensireg
