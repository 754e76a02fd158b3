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
#include <gtest/gtest.h>

#include <cmath>

#include "sensireg/error.hpp"
#include "sensireg/regularizers.hpp"
#include "sensireg/trainer.hpp"
#include "test_util.hpp"

namespace sensireg {
namespace {

using testing::MaxRelError;
using testing::NumericGradient;
using testing::ParameterValues;
using testing::RandomBatch;

double SumOf(const Tensor& t) {
  double s = 0;
  for (double v : t.data()) s += v;
  return s;
}

// Mean L2 deviation of the logits over points on the radius-eps sphere.
double MonteCarloLogitDeviation(const Model& m, const Tensor& batch, double eps, uint64_t seed) {
  Rng rng(seed);
  const std::size_t B = batch.dim(0), d = batch.numel() / B;
  double total = 0;
  const int draws = 64;
  for (std::size_t b = 0; b < B; ++b) {
    const auto x = batch.data().subspan(b * d, d);
    const auto z = m.SampleLogits(x);
    for (int k = 0; k < draws; ++k) {
      const auto u = UnitDirection(d, rng);
      std::vector<double> p(x.begin(), x.end());
      for (std::size_t j = 0; j < d; ++j) p[j] += eps * u[j];
      total += L2Distance(m.SampleLogits(p), z);
    }
  }
  return total / (B * draws);
}

TEST(NeuralSensitivity, ConstantNetworkIsZero) {
  Model m = testing::ConstantModel(3, {4, 4}, 3);
  Rng rng(1);
  NsConfig cfg;
  const SensitivityReport r = ComputeNeuralSensitivity(m, RandomBatch(6, 3, rng), cfg, rng);
  ASSERT_EQ(r.diff_sums.size(), 3u);  // two ReLU layers plus logits
  for (const auto& [id, t] : r.diff_sums) EXPECT_EQ(SumOf(t), 0.0) << id;
  for (const auto& [id, t] : r.layer_sensitivity) EXPECT_EQ(SumOf(t), 0.0) << id;
  EXPECT_EQ(NsLoss(r).item(), 0.0);
}

TEST(NeuralSensitivity, SingleLinearNeuron) {
  // y = w x in 1-D: each perturbation moves y by exactly |w| eps.
  for (double w : {0.75, -2.5}) {
    Model m = Model::FromParameters(MlpArchitecture(1, {}, 1), {{w}, {0.0}});
    const double wf = m.parameters()[0].value.at(0);
    for (int n : {1, 3, 5}) {
      NsConfig cfg;
      cfg.ns_eps = 0.1;
      cfg.n_samples = n;
      Rng rng(2);
      Tensor x = Tensor::FromData({1, 1}, {0.4});
      const SensitivityReport r = ComputeNeuralSensitivity(m, x, cfg, rng);
      const double mla = std::abs(wf * 0.4);
      EXPECT_NEAR(r.diff_sums.at(kLogitsId).at(0), n * std::abs(wf) * 0.1, 1e-12);
      EXPECT_NEAR(r.mean_activations.at(kLogitsId).at(0), mla, 1e-12);
      EXPECT_NEAR(r.layer_sensitivity.at(kLogitsId).at(0), std::abs(wf) / (mla + 1e-12), 1e-9);
      EXPECT_NEAR(NsLoss(r).item(), std::abs(wf), 1e-6);
    }
  }
}

TEST(NeuralSensitivity, ReproducibleUnderSeed) {
  Rng init(3);
  Model m = Model::Init(MlpArchitecture(4, {8, 8}, 3), init);
  Tensor batch = RandomBatch(5, 4, init);
  NsConfig cfg;
  Rng a(11), b(11);
  EXPECT_EQ(NsLoss(ComputeNeuralSensitivity(m, batch, cfg, a)).item(),
            NsLoss(ComputeNeuralSensitivity(m, batch, cfg, b)).item());
}

TEST(NeuralSensitivity, ReportInvariants) {
  Rng rng(4);
  Model m = Model::Init(MlpArchitecture(3, {6}, 2), rng);
  NsConfig cfg;
  const auto r = ComputeNeuralSensitivity(m, RandomBatch(4, 3, rng), cfg, rng);
  ASSERT_EQ(r.layer_sensitivity.size(), r.mean_activations.size());
  ASSERT_EQ(r.layer_sensitivity.size(), r.diff_sums.size());
  for (const auto& [id, ls] : r.layer_sensitivity) {
    EXPECT_EQ(ls.numel(), r.mean_activations.at(id).numel());
    EXPECT_EQ(ls.numel(), r.diff_sums.at(id).numel());
    EXPECT_EQ(ls.numel(), m.LayerWidth(id));
    for (double v : ls.data()) EXPECT_GE(v, 0.0);
    for (double v : r.mean_activations.at(id).data()) EXPECT_GE(v, 0.0);
    for (double v : r.diff_sums.at(id).data()) EXPECT_GE(v, 0.0);
  }
  EXPECT_GE(NsLoss(r).item(), 0.0);
}

TEST(NeuralSensitivity, Errors) {
  Rng rng(5);
  Model m = Model::Init(MlpArchitecture(3, {6}, 2), rng);
  NsConfig cfg;
  cfg.layers = {"dense0"};  // not a ReLU, but recordable
  EXPECT_NO_THROW(ComputeNeuralSensitivity(m, RandomBatch(2, 3, rng), cfg, rng));
  cfg.layers = {"missing"};
  EXPECT_THROW(ComputeNeuralSensitivity(m, RandomBatch(2, 3, rng), cfg, rng), Error);
  NsConfig zero_eps;
  zero_eps.ns_eps = 0;
  EXPECT_THROW(ComputeNeuralSensitivity(m, RandomBatch(2, 3, rng), zero_eps, rng), Error);
  NsConfig ok;
  EXPECT_THROW(ComputeNeuralSensitivity(m, Tensor::Zeros({0, 3}), ok, rng), Error);
}

TEST(NsLoss, HandExample) {
  SensitivityReport r;
  r.batch_size = 1;
  r.n_samples = 1;
  r.ns_eps = 1;
  r.diff_sums["L"] = Tensor::FromData({2}, {2, 4});
  r.mean_activations["L"] = Tensor::FromData({2}, {0.5, 1.0});
  // LS = diff / (1 * 1 * 1 * 2 * MLA)
  r.layer_sensitivity["L"] = Tensor::FromData({2}, {2.0 / (2 * 0.5), 4.0 / (2 * 1.0)});
  EXPECT_EQ(r.layer_sensitivity["L"].at(0), 2.0);
  EXPECT_EQ(r.layer_sensitivity["L"].at(1), 2.0);
  EXPECT_DOUBLE_EQ(NsLoss(r).item(), 3.0);
  EXPECT_DOUBLE_EQ(NsLoss(SensitivityReport{}).item(), 0.0);
}

// Random networks whose hidden biases are shifted up so that every neuron is
// active somewhere in the batch (MLA >> delta).
TEST(NsLoss, CancellationIdentityOnRandomNetworks) {
  Rng rng(6);
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 20; ++trial) {
    const std::size_t d = 2 + rng.Index(5);
    Model m = Model::Init(MlpArchitecture(d, {3 + rng.Index(6), 3 + rng.Index(6)}, 2 + rng.Index(3)), rng);
    auto values = ParameterValues(m);
    for (std::size_t k = 1; k + 2 < values.size(); k += 2)
      for (auto& b : values[k]) b = 0.5 + rng.Uniform();
    m.SetParameters(values);
    NsConfig cfg;
    cfg.ns_eps = 0.05 + rng.Uniform();
    cfg.n_samples = 1 + static_cast<int>(rng.Index(5));
    Tensor batch = RandomBatch(2 + rng.Index(6), d, rng);
    const auto r = ComputeNeuralSensitivity(m, batch, cfg, rng);
    double expected = 0;
    bool all_live = true;
    for (const auto& [id, ds] : r.diff_sums) {
      for (double v : r.mean_activations.at(id).data()) all_live &= v > 1e6 * cfg.stabilizer_delta;
      expected += SumOf(ds) / (r.batch_size * r.n_samples * r.ns_eps * ds.numel());
    }
    if (!all_live) continue;
    ++checked;
    EXPECT_NEAR(NsLoss(r).item() / expected, 1.0, 1e-5) << "trial " << trial;
  }
  EXPECT_EQ(checked, 20);
}

// Plain He networks: the identity holds neuron by neuron wherever MLA >> delta.
TEST(NsLoss, CancellationPerLiveNeuron) {
  Rng rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    Model m = Model::Init(MlpArchitecture(4, {8, 8}, 3), rng);
    NsConfig cfg;
    const auto r = ComputeNeuralSensitivity(m, RandomBatch(6, 4, rng), cfg, rng);
    for (const auto& [id, ls] : r.layer_sensitivity) {
      const double norm = r.batch_size * r.n_samples * r.ns_eps * ls.numel();
      for (std::size_t j = 0; j < ls.numel(); ++j) {
        const double mla = r.mean_activations.at(id).at(j);
        if (mla <= 1e6 * cfg.stabilizer_delta) continue;
        EXPECT_NEAR(ls.at(j) * mla, r.diff_sums.at(id).at(j) / norm,
                    1e-9 * std::max(1.0, r.diff_sums.at(id).at(j) / norm));
      }
    }
  }
}

TEST(JacobianReg, ConstantModelIsZero) {
  Model m = testing::ConstantModel(3, {4}, 2);
  Rng rng(7);
  Tensor batch = RandomBatch(3, 3, rng);
  JacobRegConfig fd;
  EXPECT_EQ(JacobianRegLoss(m, batch, fd, rng).item(), 0.0);
  JacobRegConfig exact;
  exact.mode = JacobianMode::kExact;
  EXPECT_EQ(JacobianRegLoss(m, batch, exact, rng).item(), 0.0);
}

double Frobenius2(const Model& linear) {
  double s = 0;
  for (double v : linear.parameters()[0].value.data()) s += v * v;
  return s;
}

TEST(JacobianReg, LinearModelFrobeniusOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t d = 2 + rng.Index(9), c = 2 + rng.Index(9);
    Model m = Model::Init(MlpArchitecture(d, {}, c), rng);
    Tensor x = RandomBatch(1, d, rng);
    JacobRegConfig fd;
    fd.n_projections = 1000;
    const double f2 = Frobenius2(m);
    EXPECT_NEAR(JacobianRegLoss(m, x, fd, rng).item() / f2, 1.0, 0.05);
    JacobRegConfig exact;
    exact.mode = JacobianMode::kExact;
    EXPECT_NEAR(JacobianRegLoss(m, x, exact, rng).item(), f2, 1e-6 * std::max(1.0, f2));
  }
}

TEST(JacobianReg, ExactModeHandMatrix) {
  // 2x3 map W; stored as [in=3, out=2].
  Model m = Model::FromParameters(MlpArchitecture(3, {}, 2), {{1, -2, 0.5, 3, -1, 0.25}, {0, 0}});
  Rng rng(9);
  JacobRegConfig exact;
  exact.mode = JacobianMode::kExact;
  const double expected = 1 + 4 + 0.25 + 9 + 1 + 0.0625;
  EXPECT_NEAR(JacobianRegLoss(m, RandomBatch(2, 3, rng), exact, rng).item(), expected, 1e-6);
}

TEST(JacobianReg, ScalesQuadraticallyWithWeights) {
  Rng rng(10);
  Model m = Model::Init(MlpArchitecture(4, {}, 3), rng);
  auto values = ParameterValues(m);
  const double c = 2.0;  // exact in float
  for (auto& v : values[0]) v *= c;
  Model scaled = Model::FromParameters(m.architecture(), values);
  JacobRegConfig exact;
  exact.mode = JacobianMode::kExact;
  Tensor x = RandomBatch(3, 4, rng);
  const double a = JacobianRegLoss(m, x, exact, rng).item();
  const double b = JacobianRegLoss(scaled, x, exact, rng).item();
  EXPECT_NEAR(b / a, c * c, 1e-6 * c * c);
}

TEST(JacobianReg, NonPositiveStepThrows) {
  Rng rng(11);
  Model m = Model::Init(MlpArchitecture(2, {}, 2), rng);
  JacobRegConfig bad;
  bad.fd_step = 0.0;
  EXPECT_THROW(JacobianRegLoss(m, RandomBatch(1, 2, rng), bad, rng), Error);
}

TEST(CombinedLoss, ZeroWeightsEqualCrossEntropy) {
  Rng rng(12);
  Model m = Model::Init(MlpArchitecture(3, {5}, 3), rng);
  Tensor batch = RandomBatch(4, 3, rng);
  const std::vector<int> labels = {0, 1, 2, 0};
  LossWeights w;  // both zero
  NsConfig ns;
  JacobRegConfig jr;
  const CombinedLoss l = ComputeCombinedLoss(m, batch, labels, w, ns, jr, rng);
  EXPECT_EQ(l.total.item(), SoftmaxCrossEntropy(m.Logits(batch), labels).item());
  EXPECT_EQ(l.diagnostics.total, l.diagnostics.ce);
  EXPECT_GT(l.diagnostics.ns, 0.0);
  EXPECT_GT(l.diagnostics.jacob, 0.0);
}

TEST(CombinedLoss, MnistDefaultsAreValid) {
  TrainConfig cfg;
  cfg.weights = {2.0, 0.01};
  cfg.ns.ns_eps = 1.0;
  cfg.ns.n_samples = 5;
  EXPECT_NO_THROW(cfg.Validate());
  LossWeights negative{-1.0, 0.0};
  EXPECT_THROW(negative.Validate(), Error);
}

TEST(CombinedLoss, GradientMatchesFiniteDifferenceWithFrozenRng) {
  Rng init(13);
  Model m = Model::Init(MlpArchitecture(3, {6, 5}, 3), init);
  Tensor batch = RandomBatch(4, 3, init);
  const std::vector<int> labels = {0, 1, 2, 1};
  const LossWeights w{2.0, 0.01};
  NsConfig ns;
  ns.ns_eps = 0.3;
  JacobRegConfig jr;
  jr.n_projections = 2;
  const uint64_t seed = 99;

  std::vector<Tensor> bound = m.TrainableCopies();
  Rng rng(seed);
  const Gradients g = Backward(ComputeCombinedLoss(m, batch, labels, w, ns, jr, rng, &bound).total);
  const auto base = ParameterValues(m);
  for (std::size_t k = 0; k < bound.size(); ++k) {
    auto f = [&](const std::vector<double>& v) {
      std::vector<Tensor> probe;
      for (std::size_t j = 0; j < base.size(); ++j)
        probe.push_back(Tensor::FromData(bound[j].shape(), j == k ? v : base[j]));
      Rng frozen(seed);
      return ComputeCombinedLoss(m, batch, labels, w, ns, jr, frozen, &probe).total.item();
    };
    EXPECT_LT(MaxRelError(g.ValuesOf(bound[k]), NumericGradient(f, base[k], 1e-6)), 1e-3)
        << m.parameters()[k].name;
  }
}

TEST(NsLoss, MinimizingReducesMeasuredLogitDeviation) {
  Rng init(14);
  Model m = Model::Init(MlpArchitecture(2, {8}, 2), init);
  Tensor batch = RandomBatch(16, 2, init);
  NsConfig ns;
  ns.ns_eps = 0.2;
  const double before = MonteCarloLogitDeviation(m, batch, ns.ns_eps, 1234);

  std::vector<std::vector<double>> params = ParameterValues(m);
  AdamState adam(params);
  Rng rng(15);
  for (int step = 0; step < 50; ++step) {
    std::vector<Tensor> bound = m.TrainableCopies();
    const Gradients g = Backward(NsLoss(ComputeNeuralSensitivity(m, batch, ns, rng, &bound)));
    std::vector<std::vector<double>> grads;
    for (const auto& t : bound) grads.push_back(g.ValuesOf(t));
    adam.Step(params, grads, 0.01);
    m.SetParameters(params);
  }
  const double after = MonteCarloLogitDeviation(m, batch, ns.ns_eps, 1234);
  EXPECT_LT(after, before);
}

}  // namespace
}  // namespace sensireg
