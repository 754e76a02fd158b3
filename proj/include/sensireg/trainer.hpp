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
#ifndef SENSIREG_TRAINER_HPP_
#define SENSIREG_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sensireg/data_io.hpp"
#include "sensireg/model.hpp"
#include "sensireg/regularizers.hpp"

namespace sensireg {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 1;
  std::size_t batch_size = 32;
  LossWeights weights;
  NsConfig ns;
  JacobRegConfig jr;
  uint64_t seed = 42;

  void Validate() const;
};

class AdamState {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(const std::vector<std::vector<double>>& shapes_like);

  // In-place bias-corrected Adam update of `params`.
  void Step(std::vector<std::vector<double>>& params,
            const std::vector<std::vector<double>>& grads, double lr);

  long step() const { return step_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }

 private:
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long step_ = 0;
};

// One CSV log line per epoch.
struct EpochLog {
  int epoch = 0;
  double ce = 0.0;
  double ns_loss = 0.0;
  double jacob_loss = 0.0;
  double total = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

inline constexpr const char* kTrainLogHeader =
    "epoch,ce,ns_loss,jacob_loss,total,train_acc,val_acc";
std::string FormatEpochLog(const EpochLog& e);

struct TrainResult {
  Model model;
  std::vector<EpochLog> history;
  double initial_train_acc = 0.0;
  double initial_val_acc = 0.0;
  double final_train_acc = 0.0;
  double final_val_acc = 0.0;
};

// Cross-entropy training. Aborts (kTrainingAborted) on a non-finite loss.
// `val` may be null. Log lines are streamed to `log` when given.
TrainResult Pretrain(const Model& model, const Dataset& train, const Dataset* val,
                     const TrainConfig& cfg, std::ostream* log = nullptr);

// Continued training with the combined loss. Aborts when the epoch-mean CE
// reaches log2(num_classes), or when validation accuracy stays below 1.5x
// random guessing for two consecutive epochs.
TrainResult Robustify(const Model& model, const Dataset& train, const Dataset* val,
                      const TrainConfig& cfg, std::ostream* log = nullptr);

enum class RegularizerId { kNsLoss, kJacobReg };
RegularizerId RegularizerIdFromName(const std::string& name);

struct LambdaProbe {
  double lambda = 0.0;
  double epoch_ce = 0.0;
  bool too_high = false;
};

struct LambdaSearchResult {
  double r0 = 0.0;       // mean regularizer value over the reference batches
  double lambda0 = 0.0;  // log2(C) / r0
  double lower = 0.0;    // search bracket
  double upper = 0.0;
  double recommended = 0.0;
  std::vector<LambdaProbe> probes;
};

inline constexpr int kLambdaReferenceBatches = 10;
inline constexpr int kLambdaBisectionSteps = 6;

double InitialLambda(std::size_t num_classes, double r0);

// Reference value R0 over 10 random train+validation batches, lambda0 from
// it, then a geometric bisection inside [lambda0/sqrt(10), lambda0*sqrt(10)]
// where each probe trains one epoch from `model` and is too high when the
// epoch-mean CE reaches log2(C). Returns the largest probe that was not too
// high (the lower bracket end when none passed).
LambdaSearchResult LambdaSearch(const Model& model, const Dataset& train,
                                const Dataset* val, RegularizerId regularizer,
                                const TrainConfig& cfg);

}  // namespace sensireg

#endif  // SENSIREG_TRAINER_HPP_
