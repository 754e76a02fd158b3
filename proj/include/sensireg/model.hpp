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
#ifndef SENSIREG_MODEL_HPP_
#define SENSIREG_MODEL_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sensireg/rng.hpp"
#include "sensireg/tensor.hpp"

namespace sensireg {

// Record key under which the final layer output is stored.
inline constexpr const char* kLogitsId = "logits";

enum class LayerKind { kDense, kReLU, kConv2D, kFlatten };

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  std::string id;
  // Dense.
  std::size_t in = 0;
  std::size_t out = 0;
  // Conv2D.
  std::size_t channels_in = 0;
  std::size_t filters = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;

  static LayerSpec Dense(std::string id, std::size_t in, std::size_t out);
  static LayerSpec ReLU(std::string id);
  static LayerSpec Conv2D(std::string id, std::size_t channels_in,
                          std::size_t filters, std::size_t kernel_h,
                          std::size_t kernel_w);
  static LayerSpec Flatten(std::string id);

  bool operator==(const LayerSpec&) const = default;
};

struct Architecture {
  Shape input_shape;  // per-sample shape, e.g. {2} or {1, 28, 28}
  std::vector<LayerSpec> layers;
  std::size_t num_classes = 0;

  // Per-sample output shape of every layer. Throws if layers do not compose,
  // ids collide, or the final width differs from num_classes.
  std::vector<Shape> Validate() const;
  std::string ToDescriptor() const;
  static Architecture FromDescriptor(const std::string& descriptor);

  bool operator==(const Architecture&) const = default;
};

// Fully connected ReLU network: input -> [Dense, ReLU]* -> Dense(num_classes).
Architecture MlpArchitecture(std::size_t input_dim,
                             const std::vector<std::size_t>& hidden,
                             std::size_t num_classes);
// Small CNN: [Conv2D, ReLU]* -> Flatten -> [Dense, ReLU]* -> Dense.
Architecture CnnArchitecture(const Shape& input_shape,
                             const std::vector<std::size_t>& conv_filters,
                             std::size_t kernel,
                             const std::vector<std::size_t>& hidden,
                             std::size_t num_classes);

struct ActivationRecord {
  // layer_id -> [batch, neurons] (spatial activations flattened per neuron).
  std::map<std::string, Tensor> per_layer;
};

struct ForwardResult {
  Tensor logits;
  ActivationRecord record;
};

struct NamedParameter {
  std::string name;  // "<layer_id>.weight" / "<layer_id>.bias"
  Tensor value;      // constant (requires_grad == false)
};

class Model {
 public:
  // He-normal weights (std = sqrt(2 / fan_in)), zero biases.
  static Model Init(const Architecture& arch, Rng& rng);
  // Assembles a model from explicit parameter values in declaration order.
  static Model FromParameters(const Architecture& arch,
                              const std::vector<std::vector<double>>& values);

  const Architecture& architecture() const { return arch_; }
  std::size_t num_classes() const { return arch_.num_classes; }
  std::size_t input_size() const { return NumElements(arch_.input_shape); }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::vector<std::string> ReluLayerIds() const;
  // Neuron count of a recordable layer (or kLogitsId).
  std::size_t LayerWidth(const std::string& layer_id) const;

  // Single pass returning logits and the activations of the requested layers
  // (always including logits). `batch` is [B, ...] with B * input_size()
  // elements. When `bound` is given its tensors stand in for the parameters
  // (same order), so gradients flow into them.
  ForwardResult Forward(const Tensor& batch,
                        const std::set<std::string>& record = {},
                        const std::vector<Tensor>* bound = nullptr) const;
  Tensor Logits(const Tensor& batch,
                const std::vector<Tensor>* bound = nullptr) const;
  // Argmax per sample, ties to lowest class index.
  std::vector<int> PredictLabels(const Tensor& batch) const;
  int Predict(std::span<const double> x) const;

  // Fresh requires_grad leaves holding the current parameter values.
  std::vector<Tensor> TrainableCopies() const;
  // Replaces parameter values. Values are stored rounded to 32-bit floats.
  void SetParameters(const std::vector<std::vector<double>>& values);

  // Logits of one flat sample.
  std::vector<double> SampleLogits(std::span<const double> x) const;
  // Logits of one flat sample plus J(x)^T * seed(logits), J the input-logits
  // Jacobian.
  using SeedFn = std::function<std::vector<double>(std::span<const double>)>;
  std::vector<double> SampleVjp(std::span<const double> x, const SeedFn& seed,
                                std::vector<double>& input_grad) const;

 private:
  Model(Architecture arch, std::vector<Shape> shapes,
        std::vector<NamedParameter> params);

  Architecture arch_;
  std::vector<Shape> layer_shapes_;
  std::vector<NamedParameter> params_;
  // Index of each layer's first parameter in params_, or -1.
  std::vector<int> param_offset_;
};

void SaveModel(const Model& model, const std::filesystem::path& path);
Model LoadModel(const std::filesystem::path& path);

// Accuracy of argmax predictions against labels.
double Accuracy(const Model& model, const Tensor& inputs,
                std::span<const int> labels);

}  // namespace sensireg

#endif  // SENSIREG_MODEL_HPP_
