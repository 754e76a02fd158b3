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
#include "sensireg/regularizers.hpp"

#include <algorithm>
#include <cmath>

#include "sensireg/error.hpp"

namespace sensireg {
namespace {

std::vector<std::string> ResolveLayers(const Model& model, const NsConfig& cfg) {
  if (!cfg.layers.empty()) {
    for (const std::string& id : cfg.layers) (void)model.LayerWidth(id);
    return cfg.layers;
  }
  std::vector<std::string> ids = model.ReluLayerIds();
  ids.push_back(kLogitsId);
  return ids;
}

}  // namespace

void NsConfig::Validate() const {
  Require(ns_eps > 0.0, "ns_eps must be positive");
  Require(n_samples >= 1, "ns n_samples must be at least 1");
  Require(stabilizer_delta >= 0.0, "ns stabilizer must be non-negative");
}

void JacobRegConfig::Validate() const {
  Require(fd_step > 0.0, "jacobian fd_step (eta) must be positive");
  Require(n_projections >= 1, "jacobian n_projections must be at least 1");
}

void LossWeights::Validate() const {
  Require(lambda_ns >= 0.0 && lambda_jacob >= 0.0, "loss weights must be non-negative");
}

SensitivityReport ComputeNeuralSensitivity(const Model& model, const Tensor& batch,
                                           const NsConfig& cfg, Rng& rng,
                                           const std::vector<Tensor>* bound) {
  cfg.Validate();
  Require(batch.defined() && batch.rank() >= 1 && batch.dim(0) > 0,
          "neural sensitivity: empty batch");
  const std::vector<std::string> layers = ResolveLayers(model, cfg);
  const std::size_t B = batch.dim(0);
  const std::size_t N = static_cast<std::size_t>(cfg.n_samples);
  const std::size_t d = batch.numel() / B;

  // [X; X_p^(1); ...; X_p^(N)] evaluated in one pass; rows are independent
  // so slicing recovers the per-batch activations exactly.
  std::vector<double> stacked(batch.data().begin(), batch.data().end());
  stacked.reserve((N + 1) * B * d);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t b = 0; b < B; ++b) {
      const std::vector<double> dir = UnitDirection(d, rng);
      for (std::size_t j = 0; j < d; ++j)
        stacked.push_back(batch.data()[b * d + j] + cfg.ns_eps * dir[j]);
    }
  Shape shape = batch.shape();
  shape[0] = (N + 1) * B;
  const Tensor all = Tensor::FromData(std::move(shape), std::move(stacked));
  const std::set<std::string> record(layers.begin(), layers.end());
  const ForwardResult fwd = model.Forward(all, record, bound);

  SensitivityReport report;
  report.batch_size = B;
  report.n_samples = cfg.n_samples;
  report.ns_eps = cfg.ns_eps;
  for (const std::string& id : layers) {
    const Tensor& acts = fwd.record.per_layer.at(id);
    const Tensor clean = SliceRows(acts, 0, B);
    Tensor diff_sum;
    for (std::size_t i = 1; i <= N; ++i) {
      const Tensor term = SumRows(Abs(Sub(SliceRows(acts, i * B, (i + 1) * B), clean)));
      diff_sum = diff_sum.defined() ? Add(diff_sum, term) : term;
    }
    const Tensor mla = Scale(SumRows(Abs(clean)), 1.0 / static_cast<double>(B));
    const double width = static_cast<double>(acts.numel() / acts.dim(0));
    const double norm = static_cast<double>(B) * static_cast<double>(N) * cfg.ns_eps * width;
    const Tensor ls = Scale(Div(diff_sum, mla, cfg.stabilizer_delta), 1.0 / norm);
    report.diff_sums[id] = diff_sum;
    report.mean_activations[id] = mla;
    report.layer_sensitivity[id] = ls;
  }
  return report;
}

Tensor NsLoss(const SensitivityReport& report) {
  Tensor total = Tensor::Scalar(0.0);
  for (const auto& [id, ls] : report.layer_sensitivity)
    total = Add(total, Dot(ls, report.mean_activations.at(id)));
  return total;
}

Tensor JacobianRegLoss(const Model& model, const Tensor& batch,
                       const JacobRegConfig& cfg, Rng& rng,
                       const std::vector<Tensor>* bound) {
  cfg.Validate();
  Require(batch.defined() && batch.rank() >= 1 && batch.dim(0) > 0,
          "jacobian regularizer: empty batch");
  const std::size_t B = batch.dim(0);
  const std::size_t d = batch.numel() / B;

  if (cfg.mode == JacobianMode::kExact) {
    const std::size_t C = model.num_classes();
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const auto x = batch.data().subspan(b * d, d);
      for (std::size_t k = 0; k < C; ++k) {
        std::vector<double> row;
        model.SampleVjp(
            x,
            [k](std::span<const double> z) {
              std::vector<double> e(z.size(), 0.0);
              e[k] = 1.0;
              return e;
            },
            row);
        for (double v : row) total += v * v;
      }
    }
    return Tensor::Scalar(total / static_cast<double>(B));
  }

  const std::size_t P = static_cast<std::size_t>(cfg.n_projections);
  std::vector<double> stacked(batch.data().begin(), batch.data().end());
  stacked.reserve((P + 1) * B * d);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t b = 0; b < B; ++b) {
      const std::vector<double> u = UnitDirection(d, rng);
      for (std::size_t j = 0; j < d; ++j)
        stacked.push_back(batch.data()[b * d + j] + cfg.fd_step * u[j]);
    }
  Shape shape = batch.shape();
  shape[0] = (P + 1) * B;
  const Tensor z = model.Logits(Tensor::FromData(std::move(shape), std::move(stacked)), bound);
  const Tensor clean = SliceRows(z, 0, B);
  Tensor total = Tensor::Scalar(0.0);
  for (std::size_t p = 1; p <= P; ++p)
    total = Add(total, Sum(Square(Sub(SliceRows(z, p * B, (p + 1) * B), clean))));
  const double scale = static_cast<double>(d) /
                       (cfg.fd_step * cfg.fd_step * static_cast<double>(B * P));
  return Scale(total, scale);
}

CombinedLoss ComputeCombinedLoss(const Model& model, const Tensor& batch,
                                 std::span<const int> labels, const LossWeights& weights,
                                 const NsConfig& ns_cfg, const JacobRegConfig& jr_cfg,
                                 Rng& rng, const std::vector<Tensor>* bound) {
  weights.Validate();
  Require(batch.defined() && batch.dim(0) == labels.size(),
          "combined loss: batch and labels disagree", ErrorCode::kShapeMismatch);
  const Tensor ce = SoftmaxCrossEntropy(model.Logits(batch, bound), labels);
  const Tensor ns = NsLoss(ComputeNeuralSensitivity(model, batch, ns_cfg, rng, bound));
  const Tensor jr = JacobianRegLoss(model, batch, jr_cfg, rng, bound);
  Tensor total = ce;
  if (weights.lambda_ns != 0.0) total = Add(total, Scale(ns, weights.lambda_ns));
  if (weights.lambda_jacob != 0.0) total = Add(total, Scale(jr, weights.lambda_jacob));
  CombinedLoss out;
  out.total = total;
  out.diagnostics = {ce.item(), ns.item(), jr.item(), total.item()};
  return out;
}

}  // namespace sensireg
