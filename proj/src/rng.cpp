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
#include "sensireg/rng.hpp"

#include <cmath>
#include <numeric>

namespace sensireg {
namespace {

uint64_t SplitMix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t DeriveSeed(uint64_t base, std::initializer_list<uint64_t> parts) {
  uint64_t h = SplitMix(base);
  for (uint64_t p : parts) h = SplitMix(h ^ SplitMix(p + 0x632be59bd9b4e019ULL));
  return h;
}

std::size_t Rng::Index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

std::vector<std::size_t> Rng::Permutation(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Fisher-Yates with our own index draws so the order does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[Index(i)]);
  return idx;
}

std::vector<double> UnitDirection(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  for (;;) {
    for (double& x : v) x = rng.Normal();
    const double n = L2Norm(v);
    if (n > 0.0 && std::isfinite(n)) {
      for (double& x : v) x /= n;
      return v;
    }
  }
}

std::vector<double> UniformInBall(std::size_t dim, double radius, Rng& rng) {
  std::vector<double> v = UnitDirection(dim, rng);
  const double r = radius * std::pow(rng.Uniform(), 1.0 / static_cast<double>(dim));
  for (double& x : v) x *= r;
  return v;
}

double L2Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double L2Distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace sensireg
