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
#ifndef SENSIREG_ATTACKS_HPP_
#define SENSIREG_ATTACKS_HPP_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sensireg/model.hpp"
#include "sensireg/rng.hpp"

namespace sensireg {

// Inputs live in [kInputLow, kInputHigh] elementwise.
inline constexpr double kInputLow = 0.0;
inline constexpr double kInputHigh = 1.0;

struct AttackGoal {
  int label = 0;                 // true class
  std::optional<int> target;     // set for targeted attacks

  bool targeted() const { return target.has_value(); }
  // Misclassified (untargeted) or classified as the target (targeted).
  bool Reached(int predicted) const {
    return targeted() ? predicted == *target : predicted != label;
  }
};

struct AttackOutcome {
  std::vector<double> adversarial;
  bool success = false;
  double l2_distance = 0.0;  // ||adversarial - original||_2, recomputed
  uint64_t queries = 0;      // model evaluations
  int iterations_used = 0;
};

struct PgdParams {
  double eps = 1.0;
  double step_size = 0.01;  // eps_iter
  int n_iter = 1000;        // nb_iter
  bool rand_init = true;
};

struct CwParams {
  int steps = 1000;
  double step_size = 0.1;
  double initial_const = 10.0;
  int binary_search_steps = 9;
  double confidence = 0.0;
};

struct RestartParams {
  int n_restarts = 400;
  double init_radius = 1.0;
};

struct GradExpectationParams {
  int sample_count = 10;
  double eps = 0.01;
};

struct HsjParams {
  int max_iter = 50;
  int init_grad_queries = 100;  // B_0; the batch at iteration t is B_0*sqrt(t)
  int init_size = 1000;         // random draws when searching a start point
  double theta = 1e-4;          // boundary search tolerance, relative to segment
  int max_step_halvings = 30;
};

// Projected gradient ascent on CE (descent towards the target when targeted)
// along the L2-normalized input gradient, projected on the eps ball and the
// input box each step.
AttackOutcome PgdL2(const Model& model, std::span<const double> x, const AttackGoal& goal,
                    const PgdParams& params, Rng& rng);

// Carlini-Wagner L2 in tanh space, Adam steps (moments reset per constant) and a binary
// search over the trade-off constant. `init_offset`, when given, shifts the
// starting point of every binary-search step to clip(x + offset).
AttackOutcome CwL2(const Model& model, std::span<const double> x, const AttackGoal& goal,
                   const CwParams& params,
                   const std::vector<double>* init_offset = nullptr);

// Best (minimal distance) successful run over restarts. Restart 0 starts at
// x; restart r > 0 at x plus a uniform draw from the init_radius ball.
AttackOutcome CwL2Restarts(const Model& model, std::span<const double> x,
                           const AttackGoal& goal, const CwParams& params,
                           const RestartParams& restarts, uint64_t seed);

// C&W where the model gradient at each iterate is averaged over points drawn
// uniformly from the ge_eps ball around it.
AttackOutcome CwL2GradExpectation(const Model& model, std::span<const double> x,
                                  const AttackGoal& goal, const CwParams& params,
                                  const GradExpectationParams& ge, uint64_t seed);

// Label-only access to a classifier.
using DecisionOracle = std::function<int(std::span<const double>)>;

// HopSkipJump (L2). Uses only `oracle`. The start point is `init_adversarial`
// when supplied and adversarial, else the first adversarial entry of
// `target_pool` (targeted) or of up to init_size uniform random draws.
AttackOutcome HopSkipJump(const DecisionOracle& oracle, std::span<const double> x,
                          const AttackGoal& goal, const HsjParams& params, Rng& rng,
                          const std::vector<double>* init_adversarial = nullptr,
                          std::span<const std::vector<double>> target_pool = {});

// Wraps a model and counts every kind of access. Thread-safe counters.
class CountingClassifier {
 public:
  explicit CountingClassifier(const Model& model) : model_(model) {}

  int Decide(std::span<const double> x);
  std::vector<double> Logits(std::span<const double> x);
  std::vector<double> InputGradient(std::span<const double> x, const Model::SeedFn& seed);
  DecisionOracle AsOracle();

  uint64_t decision_queries() const { return decisions_; }
  uint64_t logit_queries() const { return logits_; }
  uint64_t gradient_queries() const { return gradients_; }

 private:
  const Model& model_;
  std::atomic<uint64_t> decisions_{0};
  std::atomic<uint64_t> logits_{0};
  std::atomic<uint64_t> gradients_{0};
};

enum class AttackKind { kPgd, kCw, kCwRestarts, kCwGradExpectation, kHopSkipJump };
AttackKind AttackKindFromName(const std::string& name);
std::string AttackKindName(AttackKind kind);

struct AttackConfig {
  AttackKind kind = AttackKind::kCw;
  std::string name;  // report label; defaults to the kind name
  bool targeted = false;
  std::optional<int> target_class;  // fixed target for single-sample runs
  PgdParams pgd;
  CwParams cw;
  RestartParams restarts;
  GradExpectationParams ge;
  HsjParams hsj;
  uint64_t seed = 42;

  // Distance-minimizing attacks run once per instance and are thresholded
  // against every budget; PGD runs once per budget.
  bool MinimumDistance() const { return kind != AttackKind::kPgd; }
  std::string DisplayName() const;
  void Validate() const;
};

// Dispatches on cfg.kind. `budget` overrides pgd.eps for PGD.
AttackOutcome RunAttack(const Model& model, std::span<const double> x,
                        const AttackGoal& goal, const AttackConfig& cfg, double budget,
                        uint64_t instance_seed,
                        std::span<const std::vector<double>> target_pool = {});

// Re-derives distance and success from the model, as stored in outcomes.
void FinalizeOutcome(const Model& model, std::span<const double> x, const AttackGoal& goal,
                     AttackOutcome& outcome);

}  // namespace sensireg

#endif  // SENSIREG_ATTACKS_HPP_
