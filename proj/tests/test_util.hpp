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
#ifndef SENSIREG_TESTS_TEST_UTIL_HPP_
#define SENSIREG_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sensireg/model.hpp"
#include "sensireg/rng.hpp"
#include "sensireg/tensor.hpp"

namespace sensireg::testing {

// Central differences of f at x, step h.
inline std::vector<double> NumericGradient(const std::function<double(const std::vector<double>&)>& f,
                                           std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
inline double MaxRelError(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline std::vector<double> RandomVector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& e : v) e = lo + (hi - lo) * rng.Uniform();
  return v;
}

inline Tensor RandomBatch(std::size_t batch, std::size_t dim, Rng& rng) {
  return Tensor::FromData({batch, dim}, RandomVector(batch * dim, rng, 0.0, 1.0));
}

// Two-class linear model with logits (0, w.x + b): class 1 iff w.x + b > 0.
inline Model LinearBinary(const std::vector<double>& w, double b) {
  const std::size_t d = w.size();
  std::vector<double> weight(d * 2, 0.0);
  for (std::size_t i = 0; i < d; ++i) weight[i * 2 + 1] = w[i];
  return Model::FromParameters(MlpArchitecture(d, {}, 2), {weight, {0.0, b}});
}

// Model that ignores its input: every weight zero, fixed biases.
inline Model ConstantModel(std::size_t dim, const std::vector<std::size_t>& hidden,
                           std::size_t num_classes) {
  Rng rng(1);
  Model m = Model::Init(MlpArchitecture(dim, hidden, num_classes), rng);
  std::vector<std::vector<double>> values;
  for (const auto& p : m.parameters()) {
    const bool bias = p.name.size() > 5 && p.name.substr(p.name.size() - 5) == ".bias";
    values.emplace_back(p.value.numel(), bias ? 0.25 : 0.0);
  }
  m.SetParameters(values);
  return m;
}

inline std::vector<std::vector<double>> ParameterValues(const Model& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

}  // namespace sensireg::testing

#endif  // SENSIREG_TESTS_TEST_UTIL_HPP_
