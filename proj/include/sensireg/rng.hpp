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
#ifndef SENSIREG_RNG_HPP_
#define SENSIREG_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace sensireg {

// Mixes a base seed with a list of stream identifiers (splitmix64 finalizer
// applied per part). Used to derive independent, reproducible RNG streams
// for epochs, attack instances and restarts.
uint64_t DeriveSeed(uint64_t base, std::initializer_list<uint64_t> parts);

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double Normal() { return normal_(engine_); }
  double Uniform() { return uniform_(engine_); }
  // Uniform index in [0, n).
  std::size_t Index(std::size_t n);
  std::vector<std::size_t> Permutation(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Gaussian direction normalized to unit L2 norm; zero-norm draws are redrawn.
std::vector<double> UnitDirection(std::size_t dim, Rng& rng);

// Point drawn uniformly from the L2 ball of the given radius around the
// origin (direction * radius * U^(1/dim)).
std::vector<double> UniformInBall(std::size_t dim, double radius, Rng& rng);

double L2Norm(std::span<const double> v);
double L2Distance(std::span<const double> a, std::span<const double> b);

}  // namespace sensireg

#endif  // SENSIREG_RNG_HPP_
