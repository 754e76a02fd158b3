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

std::vector<double> SoftmaxMinusOneHot(std::span<const double> z, int cls) {
  const double mx = *std::max_element(z.begin(), z.end());
  double denom = 0.0;
  for (double v : z) denom += std::exp(v - mx);
  std::vector<double> g(z.size());
  for (std::size_t j = 0; j < z.size(); ++j)
    g[j] = std::exp(z[j] - mx) / denom - (static_cast<int>(j) == cls ? 1.0 : 0.0);
  return g;
}

}  // namespace

AttackOutcome PgdL2(const Model& model, std::span<const double> x, const AttackGoal& goal,
                    const PgdParams& params, Rng& rng) {
  Require(params.eps > 0.0, "pgd: eps must be positive");
  Require(params.step_size > 0.0 && params.n_iter >= 0, "pgd: invalid step parameters");
  const std::size_t d = x.size();
  std::vector<double> adv(x.begin(), x.end());
  if (params.rand_init) {
    const auto r = UniformInBall(d, params.eps, rng);
    for (std::size_t i = 0; i < d; ++i)
      adv[i] = std::clamp(x[i] + r[i], kInputLow, kInputHigh);
  }
  const int cls = goal.targeted() ? *goal.target : goal.label;
  // Ascend CE of the true class, or descend CE of the target.
  const double direction = goal.targeted() ? -1.0 : 1.0;
  AttackOutcome out;
  std::vector<double> grad;
  for (int it = 0; it < params.n_iter; ++it) {
    model.SampleVjp(
        adv, [cls](std::span<const double> z) { return SoftmaxMinusOneHot(z, cls); }, grad);
    ++out.queries;
    const double gn = L2Norm(grad);
    if (!(gn > 0.0) || !std::isfinite(gn)) continue;
    for (std::size_t i = 0; i < d; ++i) adv[i] += direction * params.step_size * grad[i] / gn;
    std::vector<double> delta(d);
    for (std::size_t i = 0; i < d; ++i) delta[i] = adv[i] - x[i];
    const double dn = L2Norm(delta);
    const double shrink = dn > params.eps ? params.eps / dn : 1.0;
    for (std::size_t i = 0; i < d; ++i)
      adv[i] = std::clamp(x[i] + delta[i] * shrink, kInputLow, kInputHigh);
  }
  out.iterations_used = params.n_iter;
  out.adversarial = std::move(adv);
  FinalizeOutcome(model, x, goal, out);
  ++out.queries;
  return out;
}

}  // namespace sensireg
