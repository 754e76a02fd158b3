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

#include "sensireg/attacks.hpp"
#include "sensireg/error.hpp"

namespace sensireg {
namespace {

class HsjRun {
 public:
  HsjRun(const DecisionOracle& oracle, std::span<const double> x, const AttackGoal& goal,
         const HsjParams& params)
      : oracle_(oracle), x_(x), goal_(goal), params_(params) {}

  bool IsAdversarial(std::span<const double> p) {
    ++queries_;
    return goal_.Reached(oracle_(p));
  }

  // Bisects the segment x -> adv (adv adversarial) until the blend interval
  // is below theta; returns the adversarial end.
  std::vector<double> BoundarySearch(std::span<const double> adv) {
    double lo = 0.0, hi = 1.0;
    std::vector<double> p(x_.size());
    while (hi - lo > params_.theta) {
      const double mid = 0.5 * (lo + hi);
      Blend(adv, mid, p);
      if (IsAdversarial(p)) hi = mid;
      else lo = mid;
    }
    Blend(adv, hi, p);
    return p;
  }

  // Sign-weighted Monte Carlo estimate of the boundary normal at `boundary`,
  // pointing into the adversarial region. Unit norm (or all zeros).
  std::vector<double> EstimateDirection(std::span<const double> boundary, double delta,
                                        int batch, Rng& rng) {
    const std::size_t d = x_.size();
    std::vector<std::vector<double>> dirs;
    std::vector<double> signs;
    std::vector<double> p(d);
    for (int b = 0; b < batch; ++b) {
      std::vector<double> u = UnitDirection(d, rng);
      for (std::size_t i = 0; i < d; ++i)
        p[i] = std::clamp(boundary[i] + delta * u[i], kInputLow, kInputHigh);
      for (std::size_t i = 0; i < d; ++i) u[i] = (p[i] - boundary[i]) / delta;
      signs.push_back(IsAdversarial(p) ? 1.0 : -1.0);
      dirs.push_back(std::move(u));
    }
    double mean_sign = 0.0;
    for (double s : signs) mean_sign += s;
    mean_sign /= static_cast<double>(batch);
    // Baseline subtraction unless every probe agreed.
    const double baseline = std::abs(mean_sign) == 1.0 ? 0.0 : mean_sign;
    std::vector<double> g(d, 0.0);
    for (int b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < d; ++i) g[i] += (signs[b] - baseline) * dirs[b][i];
    const double n = L2Norm(g);
    if (n > 0.0)
      for (double& v : g) v /= n;
    return g;
  }

  uint64_t queries() const { return queries_; }

 private:
  void Blend(std::span<const double> adv, double alpha, std::vector<double>& out) const {
    for (std::size_t i = 0; i < x_.size(); ++i)
      out[i] = (1.0 - alpha) * x_[i] + alpha * adv[i];
  }

  const DecisionOracle& oracle_;
  std::span<const double> x_;
  AttackGoal goal_;
  const HsjParams& params_;
  uint64_t queries_ = 0;
};

}  // namespace

AttackOutcome HopSkipJump(const DecisionOracle& oracle, std::span<const double> x,
                          const AttackGoal& goal, const HsjParams& params, Rng& rng,
                          const std::vector<double>* init_adversarial,
                          std::span<const std::vector<double>> target_pool) {
  Require(params.max_iter >= 0 && params.init_grad_queries >= 1 && params.init_size >= 0,
          "hop_skip_jump: invalid parameters");
  Require(params.theta > 0.0 && params.theta < 1.0, "hop_skip_jump: theta must be in (0,1)");
  const std::size_t d = x.size();
  HsjRun run(oracle, x, goal, params);
  AttackOutcome out;

  std::vector<double> start;
  if (init_adversarial && run.IsAdversarial(*init_adversarial)) start = *init_adversarial;
  if (start.empty() && goal.targeted()) {
    for (const auto& candidate : target_pool)
      if (run.IsAdversarial(candidate)) {
        start = candidate;
        break;
      }
  }
  if (start.empty() && !goal.targeted()) {
    std::vector<double> p(d);
    for (int i = 0; i < params.init_size; ++i) {
      for (double& v : p) v = kInputLow + (kInputHigh - kInputLow) * rng.Uniform();
      if (run.IsAdversarial(p)) {
        start = p;
        break;
      }
    }
  }
  if (start.empty()) {
    out.adversarial.assign(x.begin(), x.end());
    out.success = false;
    out.l2_distance = 0.0;
    out.queries = run.queries();
    return out;
  }

  std::vector<double> boundary = run.BoundarySearch(start);
  double dist = L2Distance(boundary, x);
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  std::vector<double> cand(d);
  for (int t = 1; t <= params.max_iter; ++t) {
    ++out.iterations_used;
    if (dist == 0.0) break;
    const double delta = sqrt_d * params.theta * dist;
    const int batch = static_cast<int>(
        std::lround(params.init_grad_queries * std::sqrt(static_cast<double>(t))));
    const std::vector<double> g = run.EstimateDirection(boundary, delta, batch, rng);
    if (L2Norm(g) == 0.0) continue;
    // Geometric step search: halve until the step stays adversarial.
    double xi = dist / std::sqrt(static_cast<double>(t));
    bool stepped = false;
    for (int h = 0; h <= params.max_step_halvings; ++h, xi *= 0.5) {
      for (std::size_t i = 0; i < d; ++i)
        cand[i] = std::clamp(boundary[i] + xi * g[i], kInputLow, kInputHigh);
      if (run.IsAdversarial(cand)) {
        stepped = true;
        break;
      }
    }
    if (!stepped) continue;
    std::vector<double> next = run.BoundarySearch(cand);
    const double next_dist = L2Distance(next, x);
    if (next_dist <= dist) {
      boundary = std::move(next);
      dist = next_dist;
    }
  }
  out.adversarial = std::move(boundary);
  out.success = true;
  out.l2_distance = L2Distance(out.adversarial, x);
  out.queries = run.queries();
  return out;
}

}  // namespace sensireg
