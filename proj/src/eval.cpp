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
#include "sensireg/eval.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <tuple>

#include "sensireg/error.hpp"

namespace sensireg {
namespace {

constexpr uint64_t kNoTarget = 0xffffffffULL;

uint64_t InstanceSeed(uint64_t base, const AttackInstance& inst) {
  return DeriveSeed(base, {static_cast<uint64_t>(inst.sample_index),
                           inst.target ? static_cast<uint64_t>(*inst.target) : kNoTarget});
}

EvalReport MakeReport(const Dataset& dataset, const EvalOptions& opts,
                      std::vector<ReportRow> rows) {
  EvalReport r;
  r.metadata.dataset = dataset.tag;
  r.metadata.seed = opts.seed;
  r.rows = std::move(rows);
  r.SortRows();
  return r;
}

// Shared row assembly: `adversarial(slot, i, eps)` says whether instance i
// counts as adversarial at eps, `correct(slot, i, eps)` whether the evaluated
// sample is classified correctly.
template <typename AdvFn, typename CorrectFn>
std::vector<ReportRow> Score(const CandidateSet& c, AdvFn adversarial, CorrectFn correct) {
  std::vector<ReportRow> rows;
  for (std::size_t b = 0; b < c.sweep.budgets.size(); ++b) {
    const double eps = c.sweep.budgets[b];
    const std::size_t slot = c.per_budget ? b : 0;
    ReportRow row;
    row.attack = c.attack_name;
    row.targeted = c.targeted;
    row.epsilon = eps;
    row.n = c.instances.size();
    double dist_sum = 0.0;
    std::size_t n_adv = 0;
    for (std::size_t i = 0; i < c.instances.size(); ++i) {
      const InstanceResult& r = c.slots[slot][i];
      row.queries += r.queries;
      const bool adv = adversarial(slot, i, eps);
      if (adv) {
        dist_sum += r.distance;
        ++n_adv;
      }
      if (correct(slot, i, adv)) ++row.n_correct;
    }
    row.mean_dist = n_adv ? dist_sum / static_cast<double>(n_adv) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void BudgetSweep::Validate() const {
  Require(!budgets.empty(), "budget sweep is empty");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    Require(budgets[i] > 0.0, "budgets must be positive");
    if (i) Require(budgets[i] > budgets[i - 1], "budgets must be strictly ascending");
  }
}

void EvalReport::SortRows() {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.attack, a.targeted, a.epsilon) < std::tie(b.attack, b.targeted, b.epsilon);
  });
}

std::vector<AttackInstance> UntargetedInstances(const Dataset& dataset, std::size_t n_samples,
                                                uint64_t seed) {
  if (!(n_samples >= 1 && n_samples <= dataset.size()))
    Fail(ErrorCode::kInvalidArgument,
         "untargeted protocol: n_samples " + std::to_string(n_samples) + " exceeds dataset size " +
             std::to_string(dataset.size()));
  Rng rng(seed);
  const auto perm = rng.Permutation(dataset.size());
  std::vector<AttackInstance> out;
  for (std::size_t i = 0; i < n_samples; ++i)
    out.push_back({perm[i], dataset.labels[perm[i]], std::nullopt});
  return out;
}

std::vector<AttackInstance> TargetedInstances(const Dataset& dataset, std::size_t n_samples,
                                              uint64_t seed) {
  Require(dataset.num_classes >= 2, "targeted protocol needs at least 2 classes");
  if (!(n_samples >= 1 && n_samples <= dataset.size()))
    Fail(ErrorCode::kInvalidArgument,
         "targeted protocol: needs " + std::to_string(n_samples) + " samples, dataset has " +
             std::to_string(dataset.size()));
  Rng rng(seed);
  const auto perm = rng.Permutation(dataset.size());
  std::vector<AttackInstance> out;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const int y = dataset.labels[perm[i]];
    for (int t = 0; t < static_cast<int>(dataset.num_classes); ++t)
      if (t != y) out.push_back({perm[i], y, t});
  }
  return out;
}

void ParallelFor(std::size_t n, std::size_t workers,
                 const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

CandidateSet GenerateCandidates(const Model& source, const AttackConfig& cfg,
                                const Dataset& dataset, const BudgetSweep& sweep,
                                std::vector<AttackInstance> instances,
                                const EvalOptions& opts) {
  cfg.Validate();
  sweep.Validate();
  Require(dataset.sample_size() == source.input_size() &&
              dataset.num_classes == source.num_classes(),
          "dataset does not match the source model", ErrorCode::kShapeMismatch);
  CandidateSet c;
  c.attack_name = cfg.DisplayName();
  c.targeted = cfg.targeted;
  c.per_budget = !cfg.MinimumDistance();
  c.sweep = sweep;
  c.instances = std::move(instances);
  const std::size_t n_slots = c.per_budget ? sweep.budgets.size() : 1;
  c.slots.assign(n_slots, std::vector<InstanceResult>(c.instances.size()));

  // Targeted HopSkipJump starts from samples the model assigns to the target.
  std::vector<std::vector<std::vector<double>>> pools;
  if (cfg.targeted && cfg.kind == AttackKind::kHopSkipJump) {
    pools.resize(dataset.num_classes);
    const auto pred = source.PredictLabels(dataset.inputs);
    for (std::size_t i = 0; i < dataset.size(); ++i) pools[pred[i]].push_back(dataset.Sample(i));
  }

  ParallelFor(c.instances.size() * n_slots, opts.workers, [&](std::size_t job) {
    const std::size_t slot = job / c.instances.size();
    const std::size_t i = job % c.instances.size();
    const AttackInstance& inst = c.instances[i];
    const auto x = dataset.SampleView(inst.sample_index);
    InstanceResult& r = c.slots[slot][i];
    if (source.Predict(x) != inst.label) {
      r = {true, 0.0, 1, {x.begin(), x.end()}};
      return;
    }
    const AttackGoal goal{inst.label, inst.target};
    uint64_t seed = InstanceSeed(cfg.seed, inst);
    if (c.per_budget) seed = DeriveSeed(seed, {static_cast<uint64_t>(slot)});
    std::span<const std::vector<double>> pool;
    if (!pools.empty() && inst.target) pool = pools[*inst.target];
    AttackOutcome o = RunAttack(source, x, goal, cfg, sweep.budgets[slot], seed, pool);
    r = {o.success, o.success ? o.l2_distance : 0.0, o.queries + 1, std::move(o.adversarial)};
  });
  return c;
}

std::vector<ReportRow> ScoreDirect(const CandidateSet& c) {
  auto adversarial = [&](std::size_t slot, std::size_t i, double eps) {
    const InstanceResult& r = c.slots[slot][i];
    return r.success && (c.per_budget || r.distance <= eps);
  };
  return Score(c, adversarial, [](std::size_t, std::size_t, bool adv) { return !adv; });
}

std::vector<ReportRow> ScoreTransfer(const CandidateSet& c, const Model& target,
                                     const Dataset& dataset) {
  Require(target.input_size() == dataset.sample_size() &&
              target.num_classes() == dataset.num_classes,
          "transfer target model does not match the dataset", ErrorCode::kShapeMismatch);
  // Classify every candidate and clean sample once.
  std::vector<std::vector<int>> cand_pred(c.slots.size());
  for (std::size_t s = 0; s < c.slots.size(); ++s)
    for (const InstanceResult& r : c.slots[s]) cand_pred[s].push_back(target.Predict(r.candidate));
  std::vector<int> clean_pred;
  for (const AttackInstance& inst : c.instances)
    clean_pred.push_back(target.Predict(dataset.SampleView(inst.sample_index)));

  auto adversarial = [&](std::size_t slot, std::size_t i, double eps) {
    const InstanceResult& r = c.slots[slot][i];
    return r.success && (c.per_budget || r.distance <= eps);
  };
  auto correct = [&](std::size_t slot, std::size_t i, bool adv) {
    const int pred = adv ? cand_pred[slot][i] : clean_pred[i];
    return pred == c.instances[i].label;
  };
  return Score(c, adversarial, correct);
}

EvalReport AdversarialTestAccuracySweep(const Model& model, const AttackConfig& cfg,
                                        const Dataset& dataset, const BudgetSweep& sweep,
                                        std::size_t n_samples, const EvalOptions& opts) {
  auto instances = cfg.targeted ? TargetedInstances(dataset, n_samples, opts.seed)
                                : UntargetedInstances(dataset, n_samples, opts.seed);
  const CandidateSet c =
      GenerateCandidates(model, cfg, dataset, sweep, std::move(instances), opts);
  return MakeReport(dataset, opts, ScoreDirect(c));
}

EvalReport TargetedSweep(const Model& model, const AttackConfig& cfg, const Dataset& dataset,
                         const BudgetSweep& sweep, const EvalOptions& opts,
                         std::size_t n_samples) {
  AttackConfig tc = cfg;
  tc.targeted = true;
  tc.target_class.reset();
  const CandidateSet c = GenerateCandidates(
      model, tc, dataset, sweep, TargetedInstances(dataset, n_samples, opts.seed), opts);
  return MakeReport(dataset, opts, ScoreDirect(c));
}

EvalReport TransferabilityEval(const Model& source, const Model& target,
                               const AttackConfig& cfg, const Dataset& dataset,
                               const BudgetSweep& sweep, std::size_t n_samples,
                               const EvalOptions& opts) {
  Require(source.architecture().input_shape == target.architecture().input_shape &&
              source.num_classes() == target.num_classes(),
          "transfer: source and target models differ in input shape or classes",
          ErrorCode::kShapeMismatch);
  auto instances = cfg.targeted ? TargetedInstances(dataset, n_samples, opts.seed)
                                : UntargetedInstances(dataset, n_samples, opts.seed);
  const CandidateSet c =
      GenerateCandidates(source, cfg, dataset, sweep, std::move(instances), opts);
  return MakeReport(dataset, opts, ScoreTransfer(c, target, dataset));
}

}  // namespace sensireg
