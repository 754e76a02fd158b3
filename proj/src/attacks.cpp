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
#include "sensireg/attacks.hpp"

#include "sensireg/error.hpp"

namespace sensireg {

int CountingClassifier::Decide(std::span<const double> x) {
  ++decisions_;
  return model_.Predict(x);
}

std::vector<double> CountingClassifier::Logits(std::span<const double> x) {
  ++logits_;
  return model_.SampleLogits(x);
}

std::vector<double> CountingClassifier::InputGradient(std::span<const double> x,
                                                      const Model::SeedFn& seed) {
  ++gradients_;
  std::vector<double> g;
  model_.SampleVjp(x, seed, g);
  return g;
}

DecisionOracle CountingClassifier::AsOracle() {
  return [this](std::span<const double> x) { return Decide(x); };
}

AttackKind AttackKindFromName(const std::string& name) {
  if (name == "pgd" || name == "pgd_l2") return AttackKind::kPgd;
  if (name == "cw" || name == "cw_l2") return AttackKind::kCw;
  if (name == "cw_restarts" || name == "cw_l2_restarts") return AttackKind::kCwRestarts;
  if (name == "cw_grad_expectation" || name == "cw_l2_grad_expectation")
    return AttackKind::kCwGradExpectation;
  if (name == "hsj" || name == "hop_skip_jump") return AttackKind::kHopSkipJump;
  Fail(ErrorCode::kInvalidArgument,
       "unknown attack kind '" + name +
           "' (expected pgd, cw, cw_restarts, cw_grad_expectation or hsj)");
}

std::string AttackKindName(AttackKind kind) {
  switch (kind) {
    case AttackKind::kPgd: return "pgd_l2";
    case AttackKind::kCw: return "cw_l2";
    case AttackKind::kCwRestarts: return "cw_l2_restarts";
    case AttackKind::kCwGradExpectation: return "cw_l2_grad_expectation";
    case AttackKind::kHopSkipJump: return "hop_skip_jump";
  }
  return "unknown";
}

std::string AttackConfig::DisplayName() const {
  return name.empty() ? AttackKindName(kind) : name;
}

void AttackConfig::Validate() const {
  for (char ch : DisplayName())
    Require(ch != ',' && ch != '"' && ch != '\n', "attack name must not contain , \" or newline");
  Require(pgd.step_size > 0.0 && pgd.n_iter >= 0 && pgd.eps > 0.0, "pgd parameters must be positive");
  Require(cw.steps >= 1 && cw.step_size > 0.0 && cw.initial_const > 0.0 &&
              cw.binary_search_steps >= 1 && cw.confidence >= 0.0,
          "cw parameters out of range");
  Require(restarts.n_restarts >= 1 && restarts.init_radius >= 0.0,
          "restart parameters out of range");
  Require(ge.sample_count >= 1 && ge.eps > 0.0, "grad expectation parameters out of range");
  Require(hsj.max_iter >= 0 && hsj.init_grad_queries >= 1 && hsj.init_size >= 0 &&
              hsj.theta > 0.0 && hsj.theta < 1.0,
          "hop_skip_jump parameters out of range");
  if (target_class) Require(targeted, "target_class requires targeted=true");
}

void FinalizeOutcome(const Model& model, std::span<const double> x, const AttackGoal& goal,
                     AttackOutcome& outcome) {
  outcome.l2_distance = L2Distance(outcome.adversarial, x);
  outcome.success = goal.Reached(model.Predict(outcome.adversarial));
}

AttackOutcome RunAttack(const Model& model, std::span<const double> x,
                        const AttackGoal& goal, const AttackConfig& cfg, double budget,
                        uint64_t instance_seed,
                        std::span<const std::vector<double>> target_pool) {
  if (goal.targeted())
    Require(*goal.target != goal.label, "attack target equals the true class");
  switch (cfg.kind) {
    case AttackKind::kPgd: {
      PgdParams p = cfg.pgd;
      p.eps = budget;
      Rng rng(instance_seed);
      return PgdL2(model, x, goal, p, rng);
    }
    case AttackKind::kCw:
      return CwL2(model, x, goal, cfg.cw);
    case AttackKind::kCwRestarts:
      return CwL2Restarts(model, x, goal, cfg.cw, cfg.restarts, instance_seed);
    case AttackKind::kCwGradExpectation:
      return CwL2GradExpectation(model, x, goal, cfg.cw, cfg.ge, instance_seed);
    case AttackKind::kHopSkipJump: {
      Rng rng(instance_seed);
      const DecisionOracle oracle = [&model](std::span<const double> p) {
        return model.Predict(p);
      };
      return HopSkipJump(oracle, x, goal, cfg.hsj, rng, nullptr, target_pool);
    }
  }
  Fail(ErrorCode::kInvalidArgument, "unknown attack kind");
}

}  // namespace sensireg
