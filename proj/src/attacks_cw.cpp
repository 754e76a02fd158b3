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

#include "sensireg/attacks.hpp"
#include "sensireg/error.hpp"

namespace sensireg {
namespace {

constexpr double kTanhEdge = 1.0 - 1e-6;

double ToTanhSpace(double v) {
  const double s = (v - kInputLow) / (kInputHigh - kInputLow) * 2.0 - 1.0;
  return std::atanh(std::clamp(s, -kTanhEdge, kTanhEdge));
}

double FromTanhSpace(double w) {
  return kInputLow + (std::tanh(w) + 1.0) * 0.5 * (kInputHigh - kInputLow);
}

int ArgMax(std::span<const double> z) {
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

// Largest logit other than `skip` (lowest index on ties).
int ArgMaxExcept(std::span<const double> z, int skip) {
  int best = -1;
  for (int j = 0; j < static_cast<int>(z.size()); ++j)
    if (j != skip && (best < 0 || z[j] > z[best])) best = j;
  return best;
}

// Adversarial under the confidence margin: the true logit is raised by kappa
// (untargeted) or the target logit lowered by kappa (targeted) before argmax.
bool ReachedWithConfidence(std::span<const double> z, const AttackGoal& goal,
                           double kappa) {
  std::vector<double> adj(z.begin(), z.end());
  if (goal.targeted()) adj[*goal.target] -= kappa;
  else adj[goal.label] += kappa;
  return goal.Reached(ArgMax(adj));
}

// d/dz of c * max(margin + kappa, 0).
std::vector<double> HingeSeed(std::span<const double> z, const AttackGoal& goal,
                              double kappa, double c) {
  std::vector<double> g(z.size(), 0.0);
  if (goal.targeted()) {
    const int t = *goal.target;
    const int other = ArgMaxExcept(z, t);
    if (z[other] - z[t] + kappa > 0.0) {
      g[other] += c;
      g[t] -= c;
    }
  } else {
    const int y = goal.label;
    const int other = ArgMaxExcept(z, y);
    if (z[y] - z[other] + kappa > 0.0) {
      g[y] += c;
      g[other] -= c;
    }
  }
  return g;
}

// Logits at `adv` plus the classification-term gradient J^T seed. Counts
// model evaluations into `queries`.
using CwGradientFn = std::function<std::vector<double>(
    std::span<const double> adv, const Model::SeedFn& seed, std::vector<double>& grad,
    uint64_t& queries)>;

AttackOutcome CwCore(const Model& model, std::span<const double> x, const AttackGoal& goal,
                     const CwParams& params, const std::vector<double>* init_offset,
                     const CwGradientFn& gradient) {
  Require(params.steps >= 1, "cw: steps must be at least 1");
  Require(params.step_size > 0.0 && params.initial_const > 0.0 &&
              params.binary_search_steps >= 1 && params.confidence >= 0.0,
          "cw: invalid parameters");
  const std::size_t d = x.size();
  std::vector<double> w0(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double start = init_offset ? std::clamp(x[i] + (*init_offset)[i], kInputLow,
                                                  kInputHigh)
                                     : x[i];
    w0[i] = ToTanhSpace(start);
  }

  AttackOutcome out;
  double best_dist = std::numeric_limits<double>::infinity();
  std::vector<double> best;
  double c = params.initial_const;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  std::vector<double> w(d), adv(d), grad, m(d), v(d);
  // Adam in tanh space, restarted for every constant.
  constexpr double kB1 = 0.9, kB2 = 0.999, kAdamEps = 1e-8;
  for (int bs = 0; bs < params.binary_search_steps; ++bs) {
    w = w0;
    std::fill(m.begin(), m.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    double b1t = 1.0, b2t = 1.0;
    bool found = false;
    for (int step = 0; step < params.steps; ++step) {
      for (std::size_t i = 0; i < d; ++i) adv[i] = FromTanhSpace(w[i]);
      const auto logits = gradient(
          adv,
          [&](std::span<const double> z) {
            return HingeSeed(z, goal, params.confidence, c);
          },
          grad, out.queries);
      ++out.iterations_used;
      if (ReachedWithConfidence(logits, goal, params.confidence)) {
        found = true;
        const double dist = L2Distance(adv, x);
        if (dist < best_dist) {
          best_dist = dist;
          best = adv;
        }
      }
      b1t *= kB1;
      b2t *= kB2;
      for (std::size_t i = 0; i < d; ++i) {
        const double t = std::tanh(w[i]);
        const double dadv_dw = 0.5 * (1.0 - t * t) * (kInputHigh - kInputLow);
        const double g = (2.0 * (adv[i] - x[i]) + grad[i]) * dadv_dw;
        m[i] = kB1 * m[i] + (1.0 - kB1) * g;
        v[i] = kB2 * v[i] + (1.0 - kB2) * g * g;
        const double mhat = m[i] / (1.0 - b1t), vhat = v[i] / (1.0 - b2t);
        w[i] -= params.step_size * mhat / (std::sqrt(vhat) + kAdamEps);
      }
    }
    if (found) {
      upper = std::min(upper, c);
      c = 0.5 * (lower + upper);
    } else {
      lower = std::max(lower, c);
      c = std::isinf(upper) ? c * 10.0 : 0.5 * (lower + upper);
    }
  }
  out.adversarial = best.empty() ? std::vector<double>(x.begin(), x.end()) : best;
  FinalizeOutcome(model, x, goal, out);
  ++out.queries;
  return out;
}

}  // namespace

AttackOutcome CwL2(const Model& model, std::span<const double> x, const AttackGoal& goal,
                   const CwParams& params, const std::vector<double>* init_offset) {
  return CwCore(model, x, goal, params, init_offset,
                [&model](std::span<const double> adv, const Model::SeedFn& seed,
                         std::vector<double>& grad, uint64_t& queries) {
                  ++queries;
                  return model.SampleVjp(adv, seed, grad);
                });
}

AttackOutcome CwL2Restarts(const Model& model, std::span<const double> x,
                           const AttackGoal& goal, const CwParams& params,
                           const RestartParams& restarts, uint64_t seed) {
  Require(restarts.n_restarts >= 1, "cw restarts: n_restarts must be at least 1");
  Require(restarts.init_radius >= 0.0, "cw restarts: init_radius must be non-negative");
  AttackOutcome best;
  uint64_t queries = 0;
  int iterations = 0;
  bool have = false;
  for (int r = 0; r < restarts.n_restarts; ++r) {
    AttackOutcome o;
    if (r == 0 || restarts.init_radius == 0.0) {
      o = CwL2(model, x, goal, params);
    } else {
      Rng rng(DeriveSeed(seed, {static_cast<uint64_t>(r)}));
      const std::vector<double> offset = UniformInBall(x.size(), restarts.init_radius, rng);
      o = CwL2(model, x, goal, params, &offset);
    }
    queries += o.queries;
    iterations += o.iterations_used;
    const bool better = !have || (o.success && (!best.success || o.l2_distance < best.l2_distance));
    if (better) {
      best = std::move(o);
      have = true;
    }
  }
  best.queries = queries;
  best.iterations_used = iterations;
  return best;
}

AttackOutcome CwL2GradExpectation(const Model& model, std::span<const double> x,
                                  const AttackGoal& goal, const CwParams& params,
                                  const GradExpectationParams& ge, uint64_t seed) {
  Require(ge.sample_count >= 1, "cw grad expectation: sample_count must be at least 1");
  Require(ge.eps > 0.0, "cw grad expectation: eps must be positive");
  Rng rng(seed);
  return CwCore(
      model, x, goal, params, nullptr,
      [&](std::span<const double> adv, const Model::SeedFn& seed_fn,
          std::vector<double>& grad, uint64_t& queries) {
        const std::vector<double> logits = model.SampleLogits(adv);
        ++queries;
        const std::vector<double> s = seed_fn(logits);
        const Model::SeedFn fixed = [&s](std::span<const double>) { return s; };
        grad.assign(adv.size(), 0.0);
        std::vector<double> point(adv.size()), g;
        for (int k = 0; k < ge.sample_count; ++k) {
          const auto r = UniformInBall(adv.size(), ge.eps, rng);
          for (std::size_t i = 0; i < adv.size(); ++i)
            point[i] = std::clamp(adv[i] + r[i], kInputLow, kInputHigh);
          model.SampleVjp(point, fixed, g);
          ++queries;
          // Running mean; exact when every sample gradient is identical.
          for (std::size_t i = 0; i < adv.size(); ++i)
            grad[i] += (g[i] - grad[i]) / static_cast<double>(k + 1);
        }
        return logits;
      });
}

}  // namespace sensireg
