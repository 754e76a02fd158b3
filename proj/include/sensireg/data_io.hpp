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
#ifndef SENSIREG_DATA_IO_HPP_
#define SENSIREG_DATA_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sensireg/tensor.hpp"

namespace sensireg {

struct Dataset {
  Tensor inputs;  // [N, ...] with values in [0, 1]
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::string tag;  // "train", "val", "test" or empty

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const;
  std::size_t sample_size() const;
  std::vector<double> Sample(std::size_t index) const;
  std::span<const double> SampleView(std::size_t index) const;
  // Rows at `indices`, in order.
  Dataset Subset(std::span<const std::size_t> indices) const;
  Tensor Batch(std::span<const std::size_t> indices) const;
  std::vector<int> BatchLabels(std::span<const std::size_t> indices) const;

  // Throws unless sizes agree, labels < num_classes and inputs lie in [0,1].
  void Validate() const;
};

inline constexpr uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr uint32_t kIdxLabelsMagic = 0x00000801;

// Big-endian IDX pair (MNIST layout). Images become [N, 1, rows, cols] scaled
// by 1/255; num_classes is max(label) + 1 (at least 10 for MNIST).
Dataset LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path);
Dataset ParseIdx(std::span<const unsigned char> images,
                 std::span<const unsigned char> labels);

enum class SyntheticKind { kBlobs, kCircles };
SyntheticKind SyntheticKindFromName(const std::string& name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kBlobs;
  std::size_t n = 600;
  std::size_t dim = 2;
  std::size_t num_classes = 2;
  double noise_std = 1.0;
  // Blob centers are drawn uniformly from [-center_box, center_box]^dim.
  double center_box = 10.0;
  uint64_t seed = 42;
};

// Blobs: Gaussian clusters at seeded centers; circles: two concentric rings.
// Both are min-max normalized per feature to [0, 1]. Sample i has label
// i % num_classes.
Dataset GenerateSynthetic(const SyntheticSpec& spec);

// Seeded permutation followed by contiguous slicing. Three-way splits are
// tagged train/val/test, two-way train/test.
std::vector<Dataset> Split(const Dataset& dataset, std::span<const double> fractions,
                           uint64_t seed);

// $SENSIREG_DATA_DIR, or "data" when unset.
std::filesystem::path DefaultDataDir();

}  // namespace sensireg

#endif  // SENSIREG_DATA_IO_HPP_
