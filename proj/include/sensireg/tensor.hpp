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
#ifndef SENSIREG_TENSOR_HPP_
#define SENSIREG_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sensireg/rng.hpp"

namespace sensireg {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

class GradSink;

namespace internal {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn =
    std::function<void(const std::vector<double>& grad_out, GradSink& sink)>;

// One entry of the gradient tape. Nodes are ordered by `seq`, assigned from a
// process-wide monotone counter at creation, so append order is total.
struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  uint64_t seq = 0;
  std::vector<NodePtr> inputs;
  BackwardFn backward;
};

}  // namespace internal

// Dense row-major real tensor with value-handle semantics. Copies share the
// underlying node; operations never mutate their inputs.
class Tensor {
 public:
  Tensor() = default;

  static Tensor FromData(Shape shape, std::vector<double> data,
                         bool requires_grad = false);
  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor Scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::span<const double> data() const;
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }
  bool requires_grad() const;

  // Copy detached from any graph.
  Tensor Detach(bool requires_grad = false) const;

  const internal::NodePtr& node() const { return node_; }
  explicit Tensor(internal::NodePtr node) : node_(std::move(node)) {}

 private:
  internal::NodePtr node_;
};

// Accumulates gradients during backward. Backward closures call Accum() for
// each input, which returns a zero-initialized buffer on first access.
class GradSink {
 public:
  std::vector<double>& Accum(const internal::NodePtr& node);
  const std::vector<double>* Find(const internal::Node* node) const;

 private:
  friend class Gradients;
  std::unordered_map<const internal::Node*, std::vector<double>> grads_;
};

// Result of a backward pass: dLoss/dT for every requires_grad tensor reached.
class Gradients {
 public:
  // Gradient wrt `t`; zeros of t's shape when t did not influence the loss.
  Tensor Of(const Tensor& t) const;
  std::vector<double> ValuesOf(const Tensor& t) const;
  bool Contains(const Tensor& t) const;

 private:
  friend Gradients Backward(const Tensor&);
  friend Gradients BackwardWithSeed(const Tensor&, std::span<const double>);
  GradSink sink_;
};

// Reverse pass over the tape reachable from `loss`; each node is visited
// exactly once in reverse append order. `loss` must be a scalar.
Gradients Backward(const Tensor& loss);

// Vector-Jacobian product: backward from a non-scalar output with an explicit
// output gradient `seed` (same element count as `output`).
Gradients BackwardWithSeed(const Tensor& output, std::span<const double> seed);

enum class ElementwiseOp {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kAbs,
  kNeg,
  kScale,
  kSquare,
  kSqrt,
};

// Generic elementwise entry point. Binary kinds accept `b` of the same shape
// or a one-element tensor (scalar broadcast). kScale multiplies by
// `constant`. kDiv rejects |denominator| < 1e-12 unless `stabilizer` is
// given, in which case it computes a / (b + stabilizer).
Tensor Elementwise(ElementwiseOp op, const Tensor& a, const Tensor* b = nullptr,
                   double constant = 0.0,
                   std::optional<double> stabilizer = std::nullopt);

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Div(const Tensor& a, const Tensor& b,
           std::optional<double> stabilizer = std::nullopt);
Tensor Abs(const Tensor& a);
Tensor Neg(const Tensor& a);
Tensor Scale(const Tensor& a, double c);
Tensor AddConstant(const Tensor& a, double c);
Tensor Square(const Tensor& a);
Tensor Sqrt(const Tensor& a);
Tensor Tanh(const Tensor& a);
Tensor Relu(const Tensor& a);

Tensor MatMul(const Tensor& a, const Tensor& b);
// input [B,C,H,W] * kernel [F,C,kH,kW] -> [B,F,H-kH+1,W-kW+1]; stride 1,
// no padding.
Tensor Conv2D(const Tensor& input, const Tensor& kernel);
// x [B,n] + bias [n] per row.
Tensor AddRowBias(const Tensor& x, const Tensor& bias);
// x [B,F,...] + bias [F] per channel.
Tensor AddChannelBias(const Tensor& x, const Tensor& bias);

Tensor Reshape(const Tensor& a, Shape shape);
Tensor Sum(const Tensor& a);
Tensor Mean(const Tensor& a);
Tensor Dot(const Tensor& a, const Tensor& b);
// Reduces over the leading axis: [B, ...] -> [...].
Tensor SumRows(const Tensor& a);
// Rows [begin, end) of the leading axis.
Tensor SliceRows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor ConcatRows(std::span<const Tensor> parts);

// Mean over the batch of -log softmax(logits)[label], max-subtracted.
Tensor SoftmaxCrossEntropy(const Tensor& logits, std::span<const int> labels);

// Point on the L2 sphere of `radius` around `center`:
// center + radius * (normalized Gaussian direction).
Tensor SampleSphere(const Tensor& center, double radius, Rng& rng);

}  // namespace sensireg

#endif  // SENSIREG_TENSOR_HPP_
