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
#include "sensireg/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <sstream>

#include "sensireg/error.hpp"
#include "sensireg/rng.hpp"

namespace sensireg {
namespace {

std::vector<unsigned char> ReadFile(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!(static_cast<bool>(f)))
    Fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

uint32_t BigEndianU32(std::span<const unsigned char> b, std::size_t off) {
  return (static_cast<uint32_t>(b[off]) << 24) | (static_cast<uint32_t>(b[off + 1]) << 16) |
         (static_cast<uint32_t>(b[off + 2]) << 8) | static_cast<uint32_t>(b[off + 3]);
}

std::string Hex(uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace

Shape Dataset::sample_shape() const {
  return Shape(inputs.shape().begin() + 1, inputs.shape().end());
}

std::size_t Dataset::sample_size() const { return NumElements(sample_shape()); }

std::vector<double> Dataset::Sample(std::size_t index) const {
  const auto v = SampleView(index);
  return {v.begin(), v.end()};
}

std::span<const double> Dataset::SampleView(std::size_t index) const {
  Require(index < size(), "sample index out of range");
  const std::size_t d = sample_size();
  return inputs.data().subspan(index * d, d);
}

Tensor Dataset::Batch(std::span<const std::size_t> indices) const {
  const std::size_t d = sample_size();
  std::vector<double> data;
  data.reserve(indices.size() * d);
  for (std::size_t i : indices) {
    const auto v = SampleView(i);
    data.insert(data.end(), v.begin(), v.end());
  }
  Shape s{indices.size()};
  const Shape inner = sample_shape();
  s.insert(s.end(), inner.begin(), inner.end());
  return Tensor::FromData(std::move(s), std::move(data));
}

std::vector<int> Dataset::BatchLabels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::Subset(std::span<const std::size_t> indices) const {
  Require(!indices.empty(), "subset: empty index list");
  Dataset d;
  d.inputs = Batch(indices);
  d.labels = BatchLabels(indices);
  d.num_classes = num_classes;
  d.tag = tag;
  return d;
}

void Dataset::Validate() const {
  Require(inputs.defined() && inputs.rank() >= 2 && inputs.dim(0) == labels.size(),
          "dataset: inputs and labels disagree in length");
  Require(num_classes >= 1, "dataset: num_classes must be positive");
  for (int y : labels)
    if (!(y >= 0 && static_cast<std::size_t>(y) < num_classes))
      Fail(ErrorCode::kInvalidArgument,
           "dataset: label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) +
               ")");
  for (double v : inputs.data())
    Require(v >= 0.0 && v <= 1.0, "dataset: input value outside [0, 1]");
}

Dataset ParseIdx(std::span<const unsigned char> images,
                 std::span<const unsigned char> labels) {
  Require(images.size() >= 16, "idx images: truncated header", ErrorCode::kCorruptFile);
  Require(labels.size() >= 8, "idx labels: truncated header", ErrorCode::kCorruptFile);
  const uint32_t im_magic = BigEndianU32(images, 0);
  if (!(im_magic == kIdxImagesMagic))
    Fail(ErrorCode::kCorruptFile,
         "idx images: magic mismatch, expected " + Hex(kIdxImagesMagic) + ", got " + Hex(im_magic));
  const uint32_t lb_magic = BigEndianU32(labels, 0);
  if (!(lb_magic == kIdxLabelsMagic))
    Fail(ErrorCode::kCorruptFile,
         "idx labels: magic mismatch, expected " + Hex(kIdxLabelsMagic) + ", got " + Hex(lb_magic));
  const std::size_t n = BigEndianU32(images, 4);
  const std::size_t rows = BigEndianU32(images, 8);
  const std::size_t cols = BigEndianU32(images, 12);
  const std::size_t n_labels = BigEndianU32(labels, 4);
  if (!(n == n_labels))
    Fail(ErrorCode::kCorruptFile,
         "idx: image count " + std::to_string(n) + " does not match label count " +
             std::to_string(n_labels));
  Require(n > 0 && rows > 0 && cols > 0, "idx images: empty dimensions",
          ErrorCode::kCorruptFile);
  Require(images.size() - 16 >= n * rows * cols, "idx images: truncated payload",
          ErrorCode::kCorruptFile);
  Require(labels.size() - 8 >= n, "idx labels: truncated payload",
          ErrorCode::kCorruptFile);
  std::vector<double> px(n * rows * cols);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = images[16 + i] / 255.0;
  Dataset d;
  d.inputs = Tensor::FromData({n, 1, rows, cols}, std::move(px));
  d.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = labels[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.num_classes = std::max<std::size_t>(10, static_cast<std::size_t>(max_label) + 1);
  return d;
}

Dataset LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path) {
  const auto im = ReadFile(images_path);
  const auto lb = ReadFile(labels_path);
  try {
    return ParseIdx(im, lb);
  } catch (const Error& e) {
    Fail(e.code(), e.what() + std::string(" (") + images_path.string() + ", " +
                       labels_path.string() + ")");
  }
}

SyntheticKind SyntheticKindFromName(const std::string& name) {
  if (name == "blobs") return SyntheticKind::kBlobs;
  if (name == "circles") return SyntheticKind::kCircles;
  Fail(ErrorCode::kInvalidArgument,
       "unknown synthetic dataset kind '" + name + "' (expected blobs or circles)");
}

Dataset GenerateSynthetic(const SyntheticSpec& spec) {
  Require(spec.num_classes >= 1 && spec.n >= spec.num_classes,
          "synthetic: need n >= num_classes >= 1");
  Require(spec.dim >= 1, "synthetic: dim must be positive");
  Require(spec.noise_std >= 0.0, "synthetic: noise_std must be non-negative");
  Rng rng(spec.seed);
  const std::size_t n = spec.n, d = spec.dim;
  std::vector<double> x(n * d);
  std::vector<int> y(n);
  if (spec.kind == SyntheticKind::kBlobs) {
    std::vector<double> centers(spec.num_classes * d);
    for (double& c : centers) c = spec.center_box * (2.0 * rng.Uniform() - 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(i % spec.num_classes);
      for (std::size_t j = 0; j < d; ++j)
        x[i * d + j] = centers[y[i] * d + j] + spec.noise_std * rng.Normal();
    }
  } else {
    Require(spec.num_classes == 2 && d == 2, "circles: requires 2 classes in 2-D");
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(i % 2);
      const double radius = y[i] == 0 ? 1.0 : 0.5;
      const double angle = 2.0 * std::numbers::pi * rng.Uniform();
      x[i * d] = radius * std::cos(angle) + spec.noise_std * rng.Normal();
      x[i * d + 1] = radius * std::sin(angle) + spec.noise_std * rng.Normal();
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, x[i * d + j]);
      hi = std::max(hi, x[i * d + j]);
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < n; ++i)
      x[i * d + j] = range > 0.0 ? (x[i * d + j] - lo) / range : 0.5;
  }
  Dataset out;
  out.inputs = Tensor::FromData({n, d}, std::move(x));
  out.labels = std::move(y);
  out.num_classes = spec.num_classes;
  return out;
}

std::vector<Dataset> Split(const Dataset& dataset, std::span<const double> fractions,
                           uint64_t seed) {
  Require(!fractions.empty(), "split: no fractions");
  double total = 0.0;
  for (double f : fractions) {
    Require(f >= 0.0, "split: negative fraction");
    total += f;
  }
  Require(std::abs(total - 1.0) <= 1e-9, "split: fractions must sum to 1");
  if (fractions.size() == 1) return {dataset};
  const std::size_t n = dataset.size();
  Rng rng(seed);
  const auto perm = rng.Permutation(n);
  static const char* kThree[] = {"train", "val", "test"};
  static const char* kTwo[] = {"train", "test"};
  std::vector<Dataset> out;
  std::size_t begin = 0;
  double cum = 0.0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    cum += fractions[k];
    const std::size_t end = k + 1 == fractions.size()
                                ? n
                                : std::min(n, static_cast<std::size_t>(std::llround(cum * n)));
    if (!(end > begin))
      Fail(ErrorCode::kInvalidArgument,
           "split: fraction " + std::to_string(k) + " yields no samples");
    Dataset part = dataset.Subset(std::span(perm).subspan(begin, end - begin));
    if (fractions.size() == 3) part.tag = kThree[k];
    else if (fractions.size() == 2) part.tag = kTwo[k];
    out.push_back(std::move(part));
    begin = end;
  }
  return out;
}

std::filesystem::path DefaultDataDir() {
  const char* env = std::getenv("SENSIREG_DATA_DIR");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("data");
}

}  // namespace sensireg
