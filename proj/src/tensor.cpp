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
#include "sensireg/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "sensireg/error.hpp"

namespace sensireg {
namespace internal {

std::atomic<uint64_t> g_next_seq{1};

NodePtr NewNode(Shape shape, std::vector<double> data, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace internal

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data,
                        bool requires_grad) {
  for (std::size_t d : shape)
    if (!(d > 0))
      Fail(ErrorCode::kShapeMismatch,
           "tensor dimensions must be positive, got " + ShapeToString(shape));
  if (!(NumElements(shape) == data.size()))
    Fail(ErrorCode::kShapeMismatch,
         "shape " + ShapeToString(shape) + " does not match " + std::to_string(data.size()) +
             " values");
  return Tensor(internal::NewNode(std::move(shape), std::move(data),
                                  requires_grad));
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = NumElements(shape);
  return FromData(std::move(shape), std::vector<double>(n, value),
                  requires_grad);
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return FromData({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  Require(defined(), "use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  Require(axis < rank(), "axis out of range");
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return defined() ? node_->data.size() : 0; }

std::span<const double> Tensor::data() const {
  Require(defined(), "use of undefined tensor");
  return node_->data;
}

double Tensor::item() const {
  if (!(numel() == 1))
    Fail(ErrorCode::kInvalidArgument,
         "item() requires a one-element tensor, got " + ShapeToString(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }

Tensor Tensor::Detach(bool requires_grad) const {
  return FromData(shape(), node_->data, requires_grad);
}

std::vector<double>& GradSink::Accum(const internal::NodePtr& node) {
  auto [it, inserted] = grads_.try_emplace(node.get());
  if (inserted) it->second.assign(node->data.size(), 0.0);
  return it->second;
}

const std::vector<double>* GradSink::Find(const internal::Node* node) const {
  auto it = grads_.find(node);
  return it == grads_.end() ? nullptr : &it->second;
}

Tensor Gradients::Of(const Tensor& t) const {
  return Tensor::FromData(t.shape(), ValuesOf(t));
}

std::vector<double> Gradients::ValuesOf(const Tensor& t) const {
  if (const auto* g = sink_.Find(t.node().get())) return *g;
  return std::vector<double>(t.numel(), 0.0);
}

bool Gradients::Contains(const Tensor& t) const {
  return sink_.Find(t.node().get()) != nullptr;
}

namespace {

std::vector<internal::Node*> ReverseTapeOrder(const internal::NodePtr& root) {
  std::vector<internal::Node*> order;
  std::unordered_set<const internal::Node*> seen;
  std::vector<internal::Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    internal::Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second)
        stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const internal::Node* a, const internal::Node* b) {
              return a->seq > b->seq;
            });
  return order;
}

void RunBackward(const Tensor& output, std::span<const double> seed,
                 GradSink& sink) {
  const auto& root = output.node();
  if (!root->requires_grad) return;
  auto& g = sink.Accum(root);
  std::copy(seed.begin(), seed.end(), g.begin());
  for (internal::Node* n : ReverseTapeOrder(root)) {
    if (!n->backward) continue;
    const std::vector<double>* grad = sink.Find(n);
    if (grad == nullptr) continue;
    // Map nodes are stable under insertion, so `*grad` stays valid while the
    // closure accumulates into its inputs.
    n->backward(*grad, sink);
  }
}

}  // namespace

Gradients Backward(const Tensor& loss) {
  if (!(loss.defined() && loss.numel() == 1))
    Fail(ErrorCode::kShapeMismatch,
         "Backward requires a scalar loss, got shape " +
             (loss.defined() ? ShapeToString(loss.shape()) : "undefined"));
  Gradients out;
  const double one = 1.0;
  RunBackward(loss, std::span<const double>(&one, 1), out.sink_);
  return out;
}

Gradients BackwardWithSeed(const Tensor& output, std::span<const double> seed) {
  Require(output.defined() && seed.size() == output.numel(),
          "seed size does not match output", ErrorCode::kShapeMismatch);
  Gradients out;
  RunBackward(output, seed, out.sink_);
  return out;
}

Tensor SampleSphere(const Tensor& center, double radius, Rng& rng) {
  Require(radius > 0.0, "SampleSphere radius must be positive");
  const std::vector<double> dir = UnitDirection(center.numel(), rng);
  std::vector<double> out(center.data().begin(), center.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += radius * dir[i];
  return Tensor::FromData(center.shape(), std::move(out));
}

}  // namespace sensireg
