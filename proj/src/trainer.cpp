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
#include "sensireg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "sensireg/error.hpp"

namespace sensireg {
namespace {

struct EpochStats {
  double ce = 0.0;
  double ns = 0.0;
  double jacob = 0.0;
  double total = 0.0;
};

std::vector<std::vector<double>> ParameterValues(const Model& model) {
  std::vector<std::vector<double>> out;
  for (const auto& p : model.parameters())
    out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

// One pass over `train` in a seed-derived order. `combined` selects the full
// robust loss; otherwise plain CE.
EpochStats RunEpoch(Model& model, const Dataset& train, const TrainConfig& cfg,
                    AdamState& adam, int epoch, bool combined) {
  const std::size_t n = train.size();
  Rng order_rng(DeriveSeed(cfg.seed, {static_cast<uint64_t>(epoch), 1}));
  Rng noise_rng(DeriveSeed(cfg.seed, {static_cast<uint64_t>(epoch), 2}));
  const std::vector<std::size_t> perm = order_rng.Permutation(n);
  EpochStats stats;
  std::size_t batches = 0;
  for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
    const std::size_t end = std::min(n, begin + cfg.batch_size);
    const std::span<const std::size_t> idx(perm.data() + begin, end - begin);
    const Tensor x = train.Batch(idx);
    const std::vector<int> y = train.BatchLabels(idx);
    const std::vector<Tensor> params = model.TrainableCopies();
    Tensor loss;
    if (combined) {
      CombinedLoss cl = ComputeCombinedLoss(model, x, y, cfg.weights, cfg.ns, cfg.jr,
                                            noise_rng, &params);
      loss = cl.total;
      stats.ce += cl.diagnostics.ce;
      stats.ns += cl.diagnostics.ns;
      stats.jacob += cl.diagnostics.jacob;
    } else {
      loss = SoftmaxCrossEntropy(model.Logits(x, &params), y);
      stats.ce += loss.item();
    }
    stats.total += loss.item();
    if (!std::isfinite(loss.item()))
      Fail(ErrorCode::kTrainingAborted,
           "training diverged: non-finite loss at epoch " + std::to_string(epoch));
    const Gradients grads = Backward(loss);
    std::vector<std::vector<double>> values = ParameterValues(model);
    std::vector<std::vector<double>> g;
    g.reserve(params.size());
    for (const Tensor& p : params) g.push_back(grads.ValuesOf(p));
    adam.Step(values, g, cfg.learning_rate);
    model.SetParameters(values);
    ++batches;
  }
  const double inv = 1.0 / static_cast<double>(batches);
  stats.ce *= inv;
  stats.ns *= inv;
  stats.jacob *= inv;
  stats.total *= inv;
  return stats;
}

double RandomGuessCe(std::size_t num_classes) {
  return std::log2(static_cast<double>(num_classes));
}

void CheckTrainInputs(const Model& model, const Dataset& train, const Dataset* val,
                      const TrainConfig& cfg) {
  cfg.Validate();
  Require(train.size() > 0, "training dataset is empty");
  Require(train.sample_size() == model.input_size() &&
              train.num_classes == model.num_classes(),
          "training dataset does not match the model", ErrorCode::kShapeMismatch);
  if (val)
    Require(val->sample_size() == model.input_size(),
            "validation dataset does not match the model", ErrorCode::kShapeMismatch);
}

enum class Mode { kPretrain, kRobustify };

TrainResult Train(const Model& start, const Dataset& train, const Dataset* val,
                  const TrainConfig& cfg, std::ostream* log, Mode mode) {
  CheckTrainInputs(start, train, val, cfg);
  TrainResult result{start, {}, 0.0, 0.0, 0.0, 0.0};
  Model& model = result.model;
  auto eval = [&](double& train_acc, double& val_acc) {
    train_acc = Accuracy(model, train.inputs, train.labels);
    val_acc = val ? Accuracy(model, val->inputs, val->labels) : train_acc;
  };
  eval(result.initial_train_acc, result.initial_val_acc);
  result.final_train_acc = result.initial_train_acc;
  result.final_val_acc = result.initial_val_acc;
  if (log) *log << kTrainLogHeader << "\n";

  const double guess_ce = RandomGuessCe(model.num_classes());
  const double collapse_acc = 1.5 / static_cast<double>(model.num_classes());
  int low_acc_epochs = 0;
  AdamState adam(ParameterValues(model));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const EpochStats s = RunEpoch(model, train, cfg, adam, epoch, mode == Mode::kRobustify);
    EpochLog e{epoch, s.ce, s.ns, s.jacob, s.total, 0.0, 0.0};
    eval(e.train_acc, e.val_acc);
    result.history.push_back(e);
    if (log) *log << FormatEpochLog(e) << "\n" << std::flush;
    result.final_train_acc = e.train_acc;
    result.final_val_acc = e.val_acc;
    if (mode != Mode::kRobustify) continue;
    if (s.ce >= guess_ce) {
      std::ostringstream msg;
      msg << "robustify aborted at epoch " << epoch << ": mean CE " << s.ce
          << " reached random-guess level " << guess_ce << " (lambda too high)";
      Fail(ErrorCode::kTrainingAborted, msg.str());
    }
    low_acc_epochs = e.val_acc < collapse_acc ? low_acc_epochs + 1 : 0;
    if (low_acc_epochs >= 2) {
      std::ostringstream msg;
      msg << "robustify aborted at epoch " << epoch << ": validation accuracy "
          << e.val_acc << " below " << collapse_acc << " for two epochs";
      Fail(ErrorCode::kTrainingAborted, msg.str());
    }
  }
  return result;
}

double ReferenceValue(const Model& model, const Tensor& batch, RegularizerId reg,
                      const TrainConfig& cfg, Rng& rng) {
  if (reg == RegularizerId::kNsLoss)
    return NsLoss(ComputeNeuralSensitivity(model, batch, cfg.ns, rng)).item();
  return JacobianRegLoss(model, batch, cfg.jr, rng).item();
}

}  // namespace

void TrainConfig::Validate() const {
  Require(learning_rate > 0.0, "learning_rate must be positive");
  Require(epochs >= 0, "epochs must be non-negative");
  Require(batch_size >= 1, "batch_size must be at least 1");
  weights.Validate();
  ns.Validate();
  jr.Validate();
}

AdamState::AdamState(const std::vector<std::vector<double>>& shapes_like) {
  for (const auto& p : shapes_like) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void AdamState::Step(std::vector<std::vector<double>>& params,
                     const std::vector<std::vector<double>>& grads, double lr) {
  if (m_.empty()) *this = AdamState(params);
  Require(params.size() == m_.size() && grads.size() == m_.size(),
          "adam: parameter count mismatch", ErrorCode::kShapeMismatch);
  ++step_;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Require(params[k].size() == m_[k].size() && grads[k].size() == m_[k].size(),
            "adam: shape mismatch", ErrorCode::kShapeMismatch);
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double g = grads[k][i];
      m_[k][i] = kBeta1 * m_[k][i] + (1.0 - kBeta1) * g;
      v_[k][i] = kBeta2 * v_[k][i] + (1.0 - kBeta2) * g * g;
      const double mhat = m_[k][i] / bc1;
      const double vhat = v_[k][i] / bc2;
      params[k][i] -= lr * mhat / (std::sqrt(vhat) + kEpsilon);
    }
  }
}

std::string FormatEpochLog(const EpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.6g,%.6g,%.6g,%.6g,%.4f,%.4f", e.epoch, e.ce,
                e.ns_loss, e.jacob_loss, e.total, e.train_acc, e.val_acc);
  return buf;
}

TrainResult Pretrain(const Model& model, const Dataset& train, const Dataset* val,
                     const TrainConfig& cfg, std::ostream* log) {
  return Train(model, train, val, cfg, log, Mode::kPretrain);
}

TrainResult Robustify(const Model& model, const Dataset& train, const Dataset* val,
                      const TrainConfig& cfg, std::ostream* log) {
  return Train(model, train, val, cfg, log, Mode::kRobustify);
}

RegularizerId RegularizerIdFromName(const std::string& name) {
  if (name == "ns" || name == "nsloss" || name == "full") return RegularizerId::kNsLoss;
  if (name == "jacob" || name == "jacobian_reg" || name == "jacobreg")
    return RegularizerId::kJacobReg;
  Fail(ErrorCode::kInvalidArgument,
       "unknown regularizer '" + name + "' (expected ns or jacob)");
}

double InitialLambda(std::size_t num_classes, double r0) {
  Require(r0 > 0.0 && std::isfinite(r0),
          "lambda search: reference regularizer value is zero (constant model?)");
  return RandomGuessCe(num_classes) / r0;
}

LambdaSearchResult LambdaSearch(const Model& model, const Dataset& train,
                                const Dataset* val, RegularizerId regularizer,
                                const TrainConfig& cfg) {
  CheckTrainInputs(model, train, val, cfg);
  LambdaSearchResult result;

  // Step 1: reference value over random batches drawn from train + val.
  Rng rng(DeriveSeed(cfg.seed, {0x1a3bda}));
  const std::size_t pool = train.size() + (val ? val->size() : 0);
  double sum = 0.0;
  for (int b = 0; b < kLambdaReferenceBatches; ++b) {
    std::vector<std::size_t> tr_idx, va_idx;
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      const std::size_t k = rng.Index(pool);
      if (k < train.size()) tr_idx.push_back(k);
      else va_idx.push_back(k - train.size());
    }
    std::vector<Tensor> parts;
    if (!tr_idx.empty()) parts.push_back(train.Batch(tr_idx));
    if (!va_idx.empty()) parts.push_back(val->Batch(va_idx));
    sum += ReferenceValue(model, ConcatRows(parts), regularizer, cfg, rng);
  }
  result.r0 = sum / kLambdaReferenceBatches;

  // Step 2.
  const std::size_t C = model.num_classes();
  result.lambda0 = InitialLambda(C, result.r0);

  // Step 3: bisection in log space, one training epoch per probe.
  const double half_decade = std::sqrt(10.0);
  result.lower = result.lambda0 / half_decade;
  result.upper = result.lambda0 * half_decade;
  const double guess_ce = RandomGuessCe(C);
  auto probe = [&](double lambda) {
    TrainConfig pc = cfg;
    pc.epochs = 1;
    pc.weights = {};
    if (regularizer == RegularizerId::kNsLoss) pc.weights.lambda_ns = lambda;
    else pc.weights.lambda_jacob = lambda;
    Model m = model;
    AdamState adam(ParameterValues(m));
    LambdaProbe p{lambda, 0.0, true};
    try {
      p.epoch_ce = RunEpoch(m, train, pc, adam, 0, /*combined=*/true).ce;
      p.too_high = !(p.epoch_ce < guess_ce);
    } catch (const Error& e) {
      // A diverging probe is too high by definition.
      if (e.code() != ErrorCode::kTrainingAborted) throw;
      p.epoch_ce = std::nan("");
    }
    result.probes.push_back(p);
    return p;
  };
  double lo = result.lower, hi = result.upper;
  bool found = false;
  for (int step = 0; step < kLambdaBisectionSteps; ++step) {
    const double mid = std::sqrt(lo * hi);
    if (probe(mid).too_high) {
      hi = mid;
    } else {
      lo = mid;
      result.recommended = mid;
      found = true;
    }
  }
  if (!found) result.recommended = result.lower;
  return result;
}

}  // namespace sensireg
