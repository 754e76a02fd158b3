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
#include <algorithm>
#include <cmath>
#include <limits>

#include "sensireg/error.hpp"
#include "sensireg/tensor.hpp"

namespace sensireg {
namespace internal {
NodePtr NewNode(Shape shape, std::vector<double> data, bool requires_grad);
}  // namespace internal

namespace {

using internal::BackwardFn;
using internal::NodePtr;

constexpr double kMinDenominator = 1e-12;

Tensor MakeResult(Shape shape, std::vector<double> data,
                  std::initializer_list<Tensor> inputs, BackwardFn backward) {
  bool requires_grad = false;
  for (const Tensor& t : inputs) requires_grad = requires_grad || t.requires_grad();
  NodePtr node = internal::NewNode(std::move(shape), std::move(data), requires_grad);
  if (requires_grad) {
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void RequireSameOrScalar(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape() || b.numel() == 1))
    Fail(ErrorCode::kShapeMismatch,
         std::string(op) + ": shape mismatch " + ShapeToString(a.shape()) + " vs " +
             ShapeToString(b.shape()));
}

// Binary elementwise op with scalar broadcast of `b`. `fwd(x, y)` computes the
// value; `dfa`/`dfb` give local partials given (x, y, out).
template <typename Fwd, typename Da, typename Db>
Tensor Binary(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
              Da dfa, Db dfb) {
  RequireSameOrScalar(a, b, name);
  const std::size_t n = a.numel();
  const bool bcast = b.shape() != a.shape();
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i], bd[bcast ? 0 : i]);
  NodePtr an = a.node(), bn = b.node();
  return MakeResult(
      a.shape(), std::move(out), {a, b},
      [an, bn, bcast, dfa, dfb](const std::vector<double>& g, GradSink& sink) {
        const auto& x = an->data;
        const auto& y = bn->data;
        if (an->requires_grad) {
          auto& ga = sink.Accum(an);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * dfa(x[i], y[bcast ? 0 : i]);
        }
        if (bn->requires_grad) {
          auto& gb = sink.Accum(bn);
          for (std::size_t i = 0; i < g.size(); ++i)
            gb[bcast ? 0 : i] += g[i] * dfb(x[i], y[bcast ? 0 : i]);
        }
      });
}

// Unary elementwise op; `df(x, out)` is the local derivative.
template <typename Fwd, typename Df>
Tensor Unary(const Tensor& a, Fwd fwd, Df df) {
  const auto ad = a.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = fwd(ad[i]);
  NodePtr an = a.node();
  auto result = MakeResult(a.shape(), std::move(out), {a}, nullptr);
  if (result.requires_grad()) {
    const internal::Node* self = result.node().get();
    // The closure reads the output values through a raw pointer to its own
    // node; the node owns the closure so the pointer outlives every call.
    result.node()->backward = [an, self, df](const std::vector<double>& g,
                                             GradSink& sink) {
      auto& ga = sink.Accum(an);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += g[i] * df(an->data[i], self->data[i]);
    };
  }
  return result;
}

double Sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

Tensor Elementwise(ElementwiseOp op, const Tensor& a, const Tensor* b,
                   double constant, std::optional<double> stabilizer) {
  auto need_b = [&]() -> const Tensor& {
    Require(b != nullptr && b->defined(), "binary elementwise op needs b");
    return *b;
  };
  switch (op) {
    case ElementwiseOp::kAdd:
      return Binary(
          a, need_b(), "add", [](double x, double y) { return x + y; },
          [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
    case ElementwiseOp::kSub:
      return Binary(
          a, need_b(), "sub", [](double x, double y) { return x - y; },
          [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
    case ElementwiseOp::kMul:
      return Binary(
          a, need_b(), "mul", [](double x, double y) { return x * y; },
          [](double, double y) { return y; }, [](double x, double) { return x; });
    case ElementwiseOp::kDiv: {
      const Tensor& den = need_b();
      RequireSameOrScalar(a, den, "div");
      const double s = stabilizer.value_or(0.0);
      if (!stabilizer) {
        for (double y : den.data())
          Require(std::abs(y) >= kMinDenominator,
                  "div: denominator magnitude below 1e-12 and no stabilizer "
                  "supplied",
                  ErrorCode::kNumerical);
      }
      return Binary(
          a, den, "div", [s](double x, double y) { return x / (y + s); },
          [s](double, double y) { return 1.0 / (y + s); },
          [s](double x, double y) { return -x / ((y + s) * (y + s)); });
    }
    case ElementwiseOp::kAbs:
      return Unary(
          a, [](double x) { return std::abs(x); },
          [](double x, double) { return Sign(x); });
    case ElementwiseOp::kNeg:
      return Unary(
          a, [](double x) { return -x; }, [](double, double) { return -1.0; });
    case ElementwiseOp::kScale:
      return Unary(
          a, [constant](double x) { return constant * x; },
          [constant](double, double) { return constant; });
    case ElementwiseOp::kSquare:
      return Unary(
          a, [](double x) { return x * x; },
          [](double x, double) { return 2.0 * x; });
    case ElementwiseOp::kSqrt:
      for (double x : a.data())
        Require(x >= 0.0, "sqrt of negative value", ErrorCode::kNumerical);
      // Subgradient 0 at x == 0 keeps outputs finite.
      return Unary(
          a, [](double x) { return std::sqrt(x); },
          [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
  }
  Fail(ErrorCode::kInvalidArgument, "unknown elementwise op");
}

Tensor Add(const Tensor& a, const Tensor& b) {
  return Elementwise(ElementwiseOp::kAdd, a, &b);
}
Tensor Sub(const Tensor& a, const Tensor& b) {
  return Elementwise(ElementwiseOp::kSub, a, &b);
}
Tensor Mul(const Tensor& a, const Tensor& b) {
  return Elementwise(ElementwiseOp::kMul, a, &b);
}
Tensor Div(const Tensor& a, const Tensor& b, std::optional<double> stabilizer) {
  return Elementwise(ElementwiseOp::kDiv, a, &b, 0.0, stabilizer);
}
Tensor Abs(const Tensor& a) { return Elementwise(ElementwiseOp::kAbs, a); }
Tensor Neg(const Tensor& a) { return Elementwise(ElementwiseOp::kNeg, a); }
Tensor Scale(const Tensor& a, double c) {
  return Elementwise(ElementwiseOp::kScale, a, nullptr, c);
}
Tensor Square(const Tensor& a) { return Elementwise(ElementwiseOp::kSquare, a); }
Tensor Sqrt(const Tensor& a) { return Elementwise(ElementwiseOp::kSqrt, a); }

Tensor AddConstant(const Tensor& a, double c) {
  return Unary(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor Tanh(const Tensor& a) {
  return Unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor Relu(const Tensor& a) {
  // Subgradient at exactly 0 is 0.
  return Unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  if (!(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0)))
    Fail(ErrorCode::kShapeMismatch,
         "matmul: incompatible shapes " + ShapeToString(a.shape()) + " and " +
             ShapeToString(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &bd[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  NodePtr an = a.node(), bn = b.node();
  return MakeResult(
      {m, n}, std::move(out), {a, b},
      [an, bn, m, k, n](const std::vector<double>& g, GradSink& sink) {
        if (an->requires_grad) {  // dA = G * B^T
          auto& ga = sink.Accum(an);
          const auto& bd = bn->data;
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bd[p * n + j];
              ga[i * k + p] += s;
            }
        }
        if (bn->requires_grad) {  // dB = A^T * G
          auto& gb = sink.Accum(bn);
          const auto& ad = an->data;
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double av = ad[i * k + p];
              if (av == 0.0) continue;
              for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
            }
        }
      });
}

Tensor Conv2D(const Tensor& input, const Tensor& kernel) {
  if (!(input.rank() == 4 && kernel.rank() == 4 && input.dim(1) == kernel.dim(1)))
    Fail(ErrorCode::kShapeMismatch,
         "conv2d: expected input [B,C,H,W] and kernel [F,C,kH,kW], got " +
             ShapeToString(input.shape()) + " and " + ShapeToString(kernel.shape()));
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2),
                    W = input.dim(3);
  const std::size_t F = kernel.dim(0), KH = kernel.dim(2), KW = kernel.dim(3);
  if (!(KH <= H && KW <= W))
    Fail(ErrorCode::kShapeMismatch,
         "conv2d: kernel " + ShapeToString(kernel.shape()) + " larger than input " +
             ShapeToString(input.shape()));
  const std::size_t OH = H - KH + 1, OW = W - KW + 1;
  const auto x = input.data();
  const auto k = kernel.data();
  std::vector<double> out(B * F * OH * OW, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f) {
      double* o = &out[((b * F) + f) * OH * OW];
      for (std::size_t c = 0; c < C; ++c) {
        const double* xi = &x[((b * C) + c) * H * W];
        const double* ki = &k[((f * C) + c) * KH * KW];
        for (std::size_t u = 0; u < KH; ++u)
          for (std::size_t v = 0; v < KW; ++v) {
            const double kv = ki[u * KW + v];
            for (std::size_t i = 0; i < OH; ++i) {
              const double* xr = &xi[(i + u) * W + v];
              double* orow = &o[i * OW];
              for (std::size_t j = 0; j < OW; ++j) orow[j] += kv * xr[j];
            }
          }
      }
    }
  NodePtr in = input.node(), kn = kernel.node();
  return MakeResult(
      {B, F, OH, OW}, std::move(out), {input, kernel},
      [=](const std::vector<double>& g, GradSink& sink) {
        const auto& x = in->data;
        const auto& k = kn->data;
        std::vector<double>* gx = in->requires_grad ? &sink.Accum(in) : nullptr;
        std::vector<double>* gk = kn->requires_grad ? &sink.Accum(kn) : nullptr;
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t f = 0; f < F; ++f) {
            const double* go = &g[((b * F) + f) * OH * OW];
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t xoff = ((b * C) + c) * H * W;
              const std::size_t koff = ((f * C) + c) * KH * KW;
              for (std::size_t u = 0; u < KH; ++u)
                for (std::size_t v = 0; v < KW; ++v) {
                  const double kv = k[koff + u * KW + v];
                  double acc = 0.0;
                  for (std::size_t i = 0; i < OH; ++i)
                    for (std::size_t j = 0; j < OW; ++j) {
                      const double gv = go[i * OW + j];
                      const std::size_t xi = xoff + (i + u) * W + (j + v);
                      acc += gv * x[xi];
                      if (gx) (*gx)[xi] += gv * kv;
                    }
                  if (gk) (*gk)[koff + u * KW + v] += acc;
                }
            }
          }
      });
}

Tensor AddRowBias(const Tensor& x, const Tensor& bias) {
  if (!(x.rank() == 2 && bias.numel() == x.dim(1)))
    Fail(ErrorCode::kShapeMismatch,
         "add_row_bias: bias " + ShapeToString(bias.shape()) + " does not match " +
             ShapeToString(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const auto xd = x.data();
  const auto bd = bias.data();
  std::vector<double> out(xd.begin(), xd.end());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += bd[j];
  NodePtr xn = x.node(), bn = bias.node();
  return MakeResult(x.shape(), std::move(out), {x, bias},
                    [xn, bn, rows, cols](const std::vector<double>& g,
                                         GradSink& sink) {
                      if (xn->requires_grad) {
                        auto& gx = sink.Accum(xn);
                        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                      }
                      if (bn->requires_grad) {
                        auto& gb = sink.Accum(bn);
                        for (std::size_t i = 0; i < rows; ++i)
                          for (std::size_t j = 0; j < cols; ++j)
                            gb[j] += g[i * cols + j];
                      }
                    });
}

Tensor AddChannelBias(const Tensor& x, const Tensor& bias) {
  if (!(x.rank() >= 2 && bias.numel() == x.dim(1)))
    Fail(ErrorCode::kShapeMismatch,
         "add_channel_bias: bias " + ShapeToString(bias.shape()) + " does not match " +
             ShapeToString(x.shape()));
  const std::size_t B = x.dim(0), F = x.dim(1);
  const std::size_t inner = x.numel() / (B * F);
  const auto xd = x.data();
  const auto bd = bias.data();
  std::vector<double> out(xd.begin(), xd.end());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t i = 0; i < inner; ++i) out[(b * F + f) * inner + i] += bd[f];
  NodePtr xn = x.node(), bn = bias.node();
  return MakeResult(x.shape(), std::move(out), {x, bias},
                    [xn, bn, B, F, inner](const std::vector<double>& g,
                                          GradSink& sink) {
                      if (xn->requires_grad) {
                        auto& gx = sink.Accum(xn);
                        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                      }
                      if (bn->requires_grad) {
                        auto& gb = sink.Accum(bn);
                        for (std::size_t b = 0; b < B; ++b)
                          for (std::size_t f = 0; f < F; ++f)
                            for (std::size_t i = 0; i < inner; ++i)
                              gb[f] += g[(b * F + f) * inner + i];
                      }
                    });
}

Tensor Reshape(const Tensor& a, Shape shape) {
  if (!(NumElements(shape) == a.numel()))
    Fail(ErrorCode::kShapeMismatch,
         "reshape: cannot view " + ShapeToString(a.shape()) + " as " + ShapeToString(shape));
  const auto ad = a.data();
  NodePtr an = a.node();
  return MakeResult(std::move(shape), std::vector<double>(ad.begin(), ad.end()),
                    {a}, [an](const std::vector<double>& g, GradSink& sink) {
                      auto& ga = sink.Accum(an);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                    });
}

Tensor Sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  NodePtr an = a.node();
  return MakeResult({}, {s}, {a},
                    [an](const std::vector<double>& g, GradSink& sink) {
                      auto& ga = sink.Accum(an);
                      for (double& v : ga) v += g[0];
                    });
}

Tensor Mean(const Tensor& a) {
  return Scale(Sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor Dot(const Tensor& a, const Tensor& b) {
  if (!(a.numel() == b.numel()))
    Fail(ErrorCode::kShapeMismatch,
         "dot: length mismatch " + ShapeToString(a.shape()) + " vs " + ShapeToString(b.shape()));
  return Sum(Mul(a, Reshape(b, a.shape())));
}

Tensor SumRows(const Tensor& a) {
  Require(a.rank() >= 1, "sum_rows: rank-0 tensor", ErrorCode::kShapeMismatch);
  const std::size_t rows = a.dim(0);
  const std::size_t cols = a.numel() / rows;
  Shape out_shape(a.shape().begin() + 1, a.shape().end());
  const auto ad = a.data();
  std::vector<double> out(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j] += ad[i * cols + j];
  NodePtr an = a.node();
  return MakeResult(std::move(out_shape), std::move(out), {a},
                    [an, rows, cols](const std::vector<double>& g, GradSink& sink) {
                      auto& ga = sink.Accum(an);
                      for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < cols; ++j)
                          ga[i * cols + j] += g[j];
                    });
}

Tensor SliceRows(const Tensor& a, std::size_t begin, std::size_t end) {
  Require(a.rank() >= 1 && begin < end && end <= a.dim(0),
          "slice_rows: invalid range", ErrorCode::kShapeMismatch);
  const std::size_t cols = a.numel() / a.dim(0);
  Shape out_shape = a.shape();
  out_shape[0] = end - begin;
  const auto ad = a.data();
  std::vector<double> out(ad.begin() + begin * cols, ad.begin() + end * cols);
  NodePtr an = a.node();
  const std::size_t offset = begin * cols;
  return MakeResult(std::move(out_shape), std::move(out), {a},
                    [an, offset](const std::vector<double>& g, GradSink& sink) {
                      auto& ga = sink.Accum(an);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
                    });
}

Tensor ConcatRows(std::span<const Tensor> parts) {
  Require(!parts.empty(), "concat_rows: no inputs");
  Shape inner(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  bool requires_grad = false;
  for (const Tensor& p : parts) {
    Require(p.rank() >= 1 &&
                Shape(p.shape().begin() + 1, p.shape().end()) == inner,
            "concat_rows: inconsistent trailing shape",
            ErrorCode::kShapeMismatch);
    rows += p.dim(0);
    requires_grad = requires_grad || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(rows * NumElements(inner));
  std::vector<NodePtr> nodes;
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    nodes.push_back(p.node());
  }
  Shape shape{rows};
  shape.insert(shape.end(), inner.begin(), inner.end());
  NodePtr node = internal::NewNode(std::move(shape), std::move(out), requires_grad);
  if (requires_grad) {
    node->inputs = nodes;
    node->backward = [nodes](const std::vector<double>& g, GradSink& sink) {
      std::size_t off = 0;
      for (const auto& n : nodes) {
        if (n->requires_grad) {
          auto& gn = sink.Accum(n);
          for (std::size_t i = 0; i < gn.size(); ++i) gn[i] += g[off + i];
        }
        off += n->data.size();
      }
    };
  }
  return Tensor(std::move(node));
}

Tensor SoftmaxCrossEntropy(const Tensor& logits, std::span<const int> labels) {
  if (!(logits.rank() == 2 && logits.dim(0) == labels.size()))
    Fail(ErrorCode::kShapeMismatch,
         "softmax_cross_entropy: logits " + ShapeToString(logits.shape()) + " vs " +
             std::to_string(labels.size()) + " labels");
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  for (int y : labels)
    if (!(y >= 0 && static_cast<std::size_t>(y) < C))
      Fail(ErrorCode::kInvalidArgument,
           "softmax_cross_entropy: label " + std::to_string(y) + " out of range [0, " +
               std::to_string(C) + ")");
  const auto z = logits.data();
  std::vector<double> probs(B * C);
  double loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const double* row = &z[i * C];
    const double mx = *std::max_element(row, row + C);
    double denom = 0.0;
    for (std::size_t j = 0; j < C; ++j) denom += std::exp(row[j] - mx);
    const double log_denom = std::log(denom);
    for (std::size_t j = 0; j < C; ++j)
      probs[i * C + j] = std::exp(row[j] - mx - log_denom);
    loss += log_denom - (row[labels[i]] - mx);
  }
  loss /= static_cast<double>(B);
  NodePtr ln = logits.node();
  std::vector<int> ys(labels.begin(), labels.end());
  return MakeResult(
      {}, {loss}, {logits},
      [ln, probs = std::move(probs), ys = std::move(ys), B, C](
          const std::vector<double>& g, GradSink& sink) {
        auto& gl = sink.Accum(ln);
        const double scale = g[0] / static_cast<double>(B);
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t j = 0; j < C; ++j) {
            const double onehot = static_cast<std::size_t>(ys[i]) == j ? 1.0 : 0.0;
            gl[i * C + j] += scale * (probs[i * C + j] - onehot);
          }
      });
}

}  // namespace sensireg
