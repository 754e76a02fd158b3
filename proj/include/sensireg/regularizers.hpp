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
#ifndef SENSIREG_REGULARIZERS_HPP_
#define SENSIREG_REGULARIZERS_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sensireg/model.hpp"
#include "sensireg/rng.hpp"
#include "sensireg/tensor.hpp"

namespace sensireg {

struct NsConfig {
  double ns_eps = 1.0;      // L2 radius of the perturbation sphere
  int n_samples = 5;        // perturbations per sample (N)
  // Layers to measure. Empty means every ReLU output plus the logits.
  std::vector<std::string> layers;
  double stabilizer_delta = 1e-12;  // added to MLA in the LS denominator

  void Validate() const;
};

// Per-layer neuron sensitivity. Every tensor is a [neurons] vector that
// stays on the gradient tape.
struct SensitivityReport {
  std::map<std::string, Tensor> layer_sensitivity;  // LS
  std::map<std::string, Tensor> mean_activations;   // MLA
  std::map<std::string, Tensor> diff_sums;
  std::size_t batch_size = 0;
  int n_samples = 0;
  double ns_eps = 0.0;
};

// Draws N points on the NsEps sphere around every sample, evaluates the
// model on the clean and perturbed batches, and forms
//   diff_sums[L] = sum_i sum_batch |A(X_p^i)[L] - A(X)[L]|
//   MLA[L]       = mean_batch |A(X)[L]|
//   LS[L]        = diff_sums[L] / (len(X) * N * NsEps * len(L) * (MLA[L] + delta))
SensitivityReport ComputeNeuralSensitivity(const Model& model, const Tensor& batch,
                                           const NsConfig& cfg, Rng& rng,
                                           const std::vector<Tensor>* bound = nullptr);

// sum over layers of LS[L] . MLA[L].
Tensor NsLoss(const SensitivityReport& report);

enum class JacobianMode { kFiniteDifference, kExact };

struct JacobRegConfig {
  int n_projections = 1;
  double fd_step = 1e-2;  // eta
  JacobianMode mode = JacobianMode::kFiniteDifference;

  void Validate() const;
};

// Mean squared Frobenius norm of the input-logits Jacobian over the batch.
// Finite-difference mode averages dim(x) * ||(z(x + eta u) - z(x)) / eta||^2
// over unit directions u and is differentiable wrt the parameters. Exact mode
// sums squared row gradients; it is a constant (no tape) meant for checks.
Tensor JacobianRegLoss(const Model& model, const Tensor& batch,
                       const JacobRegConfig& cfg, Rng& rng,
                       const std::vector<Tensor>* bound = nullptr);

struct LossWeights {
  double lambda_ns = 0.0;
  double lambda_jacob = 0.0;

  void Validate() const;
};

struct LossDiagnostics {
  double ce = 0.0;
  double ns = 0.0;
  double jacob = 0.0;
  double total = 0.0;
};

struct CombinedLoss {
  Tensor total;
  LossDiagnostics diagnostics;
};

// CE + lambda_ns * NsLoss + lambda_jacob * JacobReg. All three raw terms are
// evaluated (and reported) regardless of the weights.
CombinedLoss ComputeCombinedLoss(const Model& model, const Tensor& batch,
                                 std::span<const int> labels, const LossWeights& weights,
                                 const NsConfig& ns_cfg, const JacobRegConfig& jr_cfg,
                                 Rng& rng, const std::vector<Tensor>* bound = nullptr);

}  // namespace sensireg

#endif  // SENSIREG_REGULARIZERS_HPP_
