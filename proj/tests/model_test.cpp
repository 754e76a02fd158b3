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
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sensireg/error.hpp"
#include "sensireg/model.hpp"
#include "test_util.hpp"

namespace sensireg {
namespace {

namespace fs = std::filesystem;
using testing::MaxRelError;
using testing::NumericGradient;
using testing::ParameterValues;
using testing::RandomBatch;

std::vector<double> Values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

fs::path TempPath(const std::string& name) {
  return fs::temp_directory_path() / ("sensireg_model_test_" + name);
}

std::vector<char> ReadBytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void WriteBytes(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Model SmallCnn(uint64_t seed) {
  Rng rng(seed);
  return Model::Init(CnnArchitecture({1, 6, 6}, {3}, 3, {5}, 4), rng);
}

TEST(Forward, EmptyRecordHasOnlyLogits) {
  Rng rng(1);
  Model m = Model::Init(MlpArchitecture(3, {4}, 2), rng);
  ForwardResult r = m.Forward(RandomBatch(5, 3, rng));
  ASSERT_EQ(r.record.per_layer.size(), 1u);
  EXPECT_EQ(r.record.per_layer.begin()->first, kLogitsId);
  EXPECT_EQ(r.logits.shape(), (Shape{5, 2}));
}

TEST(Forward, RecordsRequestedLayersWithBatchLeadingDim) {
  Model m = SmallCnn(2);
  Rng rng(3);
  Tensor batch = Tensor::FromData({7, 1, 6, 6}, testing::RandomVector(7 * 36, rng, 0, 1));
  const auto relus = m.ReluLayerIds();
  ASSERT_EQ(relus.size(), 2u);
  std::set<std::string> want(relus.begin(), relus.end());
  ForwardResult r = m.Forward(batch, want);
  EXPECT_EQ(r.record.per_layer.size(), 3u);
  for (const auto& [id, t] : r.record.per_layer) {
    EXPECT_EQ(t.dim(0), 7u) << id;
    EXPECT_EQ(t.rank(), 2u) << id;
    EXPECT_EQ(t.dim(1), m.LayerWidth(id)) << id;
  }
  // conv 3 filters on 4x4 output positions
  EXPECT_EQ(m.LayerWidth("conv_relu0"), 3u * 4 * 4);
}

TEST(Forward, UnknownLayerThrows) {
  Rng rng(1);
  Model m = Model::Init(MlpArchitecture(3, {4}, 2), rng);
  EXPECT_THROW(m.Forward(RandomBatch(2, 3, rng), {"nope"}), Error);
}

TEST(Forward, WrongBatchSizeThrows) {
  Rng rng(1);
  Model m = Model::Init(MlpArchitecture(3, {4}, 2), rng);
  EXPECT_THROW(m.Logits(Tensor::Zeros({2, 4})), Error);
}

TEST(Forward, IdentityDenseLayerReproducesMatmul) {
  const Architecture arch = MlpArchitecture(2, {}, 2);
  Model m = Model::FromParameters(arch, {{1, 0, 0, 1}, {0, 0}});
  Tensor x = Tensor::FromData({1, 2}, {0.25, 0.75});
  ForwardResult r = m.Forward(x, {kLogitsId});
  EXPECT_EQ(Values(r.record.per_layer.at(kLogitsId)), (std::vector<double>{0.25, 0.75}));
}

TEST(Forward, RecordingDoesNotChangeLogits) {
  Model m = SmallCnn(4);
  Rng rng(5);
  Tensor batch = Tensor::FromData({3, 1, 6, 6}, testing::RandomVector(108, rng, 0, 1));
  const auto relus = m.ReluLayerIds();
  const auto plain = Values(m.Logits(batch));
  const auto recorded = Values(m.Forward(batch, {relus.begin(), relus.end()}).logits);
  EXPECT_EQ(plain, recorded);
  EXPECT_EQ(plain, Values(m.Logits(batch)));  // no hidden state
}

TEST(PredictLabels, ArgmaxTiesAndBatch) {
  const Architecture arch = MlpArchitecture(2, {}, 2);
  // logits = x, so inputs are the logits
  Model m = Model::FromParameters(arch, {{1, 0, 0, 1}, {0, 0}});
  const std::vector<double> a = {0.1, 0.9};
  const std::vector<double> tie = {0.5, 0.5};
  EXPECT_EQ(m.Predict(a), 1);
  EXPECT_EQ(m.Predict(tie), 0);
  EXPECT_EQ(m.PredictLabels(Tensor::FromData({3, 2}, {0.1, 0.9, 0.5, 0.5, 1.0, 0.0})),
            (std::vector<int>{1, 0, 0}));
}

TEST(PredictLabels, InvariantUnderPositiveLogitScaling) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Model m = Model::Init(MlpArchitecture(4, {6}, 3), rng);
    auto values = ParameterValues(m);
    const double c = 0.1 + 5 * rng.Uniform();
    for (auto& v : values[values.size() - 2]) v *= c;
    for (auto& v : values.back()) v *= c;
    Model scaled = Model::FromParameters(m.architecture(), values);
    Tensor batch = RandomBatch(16, 4, rng);
    EXPECT_EQ(m.PredictLabels(batch), scaled.PredictLabels(batch));
  }
}

TEST(Init, ZeroBiasesAndDeterminism) {
  Rng a(42), b(42);
  const Architecture arch = CnnArchitecture({1, 5, 5}, {2}, 3, {4}, 3);
  Model m1 = Model::Init(arch, a);
  Model m2 = Model::Init(arch, b);
  EXPECT_EQ(ParameterValues(m1), ParameterValues(m2));
  for (const auto& p : m1.parameters()) {
    if (p.name.ends_with(".bias"))
      for (double v : p.value.data()) EXPECT_EQ(v, 0.0) << p.name;
  }
}

TEST(Init, HeStandardDeviation) {
  // fan_in 256 with 40 outputs gives 10240 draws.
  Rng rng(7);
  Model m = Model::Init(MlpArchitecture(256, {}, 40), rng);
  const auto w = m.parameters()[0].value.data();
  double sum = 0, sq = 0;
  for (double v : w) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(w.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  EXPECT_NEAR(sd / std::sqrt(2.0 / 256), 1.0, 0.1);
}

TEST(Architecture, RejectsNonComposingAndDuplicateLayers) {
  Architecture bad = MlpArchitecture(3, {4}, 2);
  bad.layers[2].in = 5;
  EXPECT_THROW(bad.Validate(), Error);
  Architecture dup = MlpArchitecture(3, {4}, 2);
  dup.layers[1].id = "dense0";
  EXPECT_THROW(dup.Validate(), Error);
  Architecture width = MlpArchitecture(3, {4}, 2);
  width.num_classes = 3;
  EXPECT_THROW(width.Validate(), Error);
  Rng rng(1);
  EXPECT_THROW(Model::Init(bad, rng), Error);
}

TEST(Architecture, DescriptorRoundTrip) {
  const Architecture arch = CnnArchitecture({1, 8, 8}, {2, 3}, 3, {7}, 5);
  EXPECT_EQ(Architecture::FromDescriptor(arch.ToDescriptor()), arch);
}

TEST(Persistence, RoundTripIsBitExact) {
  Model m = SmallCnn(8);
  const fs::path p = TempPath("roundtrip.sreg");
  SaveModel(m, p);
  Model loaded = LoadModel(p);
  EXPECT_EQ(loaded.architecture(), m.architecture());
  EXPECT_EQ(ParameterValues(loaded), ParameterValues(m));
  Rng rng(9);
  Tensor batch = Tensor::FromData({4, 1, 6, 6}, testing::RandomVector(144, rng, 0, 1));
  EXPECT_EQ(Values(loaded.Logits(batch)), Values(m.Logits(batch)));
  // Saving the loaded model again gives the same bytes.
  const fs::path p2 = TempPath("roundtrip2.sreg");
  SaveModel(loaded, p2);
  EXPECT_EQ(ReadBytes(p), ReadBytes(p2));
  fs::remove(p);
  fs::remove(p2);
}

TEST(Persistence, HeaderLayout) {
  Model m = Model::FromParameters(MlpArchitecture(1, {}, 2), {{0.5, -1.0}, {0.25, 2.0}});
  const fs::path p = TempPath("layout.sreg");
  SaveModel(m, p);
  const auto bytes = ReadBytes(p);
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SREG");
  EXPECT_EQ(bytes[4], 1);  // version 1, little endian
  EXPECT_EQ(bytes[5], 0);
  uint32_t desc_len = 0;
  std::memcpy(&desc_len, bytes.data() + 8, 4);
  EXPECT_EQ(bytes.size(), 12u + desc_len + 4 * 4);
  float first = 0;
  std::memcpy(&first, bytes.data() + 12 + desc_len, 4);
  EXPECT_EQ(first, 0.5f);
  fs::remove(p);
}

TEST(Persistence, CorruptFilesAreRejected) {
  Model m = SmallCnn(10);
  const fs::path p = TempPath("corrupt.sreg");
  SaveModel(m, p);
  const auto good = ReadBytes(p);
  auto expect_code = [&](const std::vector<char>& bytes, ErrorCode code) {
    WriteBytes(p, bytes);
    try {
      LoadModel(p);
      ADD_FAILURE() << "loaded a bad file";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  expect_code({good.begin(), good.end() - 3}, ErrorCode::kCorruptFile);
  expect_code({good.begin(), good.begin() + 6}, ErrorCode::kCorruptFile);
  auto magic = good;
  magic[0] = 'X';
  expect_code(magic, ErrorCode::kCorruptFile);
  auto version = good;
  version[4] = 2;
  expect_code(version, ErrorCode::kVersionMismatch);
  auto trailing = good;
  trailing.push_back(0);
  expect_code(trailing, ErrorCode::kCorruptFile);
  fs::remove(p);
  try {
    LoadModel(p);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(Parameters, SetParametersRoundsToFloat) {
  Model m = Model::FromParameters(MlpArchitecture(1, {}, 1), {{0.1}, {1.0 / 3.0}});
  EXPECT_EQ(m.parameters()[0].value.at(0), static_cast<double>(0.1f));
  EXPECT_EQ(m.parameters()[1].value.at(0), static_cast<double>(1.0f / 3.0f));
}

// CE gradient wrt every parameter of small random networks, analytic vs
// central differences.
void CheckParameterGradients(const Model& m, const Tensor& batch, const std::vector<int>& labels) {
  std::vector<Tensor> bound = m.TrainableCopies();
  const Gradients g = Backward(SoftmaxCrossEntropy(m.Logits(batch, &bound), labels));
  const auto base = ParameterValues(m);
  for (std::size_t k = 0; k < bound.size(); ++k) {
    auto f = [&](const std::vector<double>& v) {
      std::vector<Tensor> probe;
      for (std::size_t j = 0; j < base.size(); ++j)
        probe.push_back(Tensor::FromData(bound[j].shape(), j == k ? v : base[j]));
      return SoftmaxCrossEntropy(m.Logits(batch, &probe), labels).item();
    };
    EXPECT_LT(MaxRelError(g.ValuesOf(bound[k]), NumericGradient(f, base[k])), 1e-4)
        << m.parameters()[k].name;
  }
}

TEST(Gradients, TwoLayerMlpMatchesFiniteDifference) {
  Rng rng(11);
  Model m = Model::Init(MlpArchitecture(3, {5}, 3), rng);
  CheckParameterGradients(m, RandomBatch(4, 3, rng), {0, 1, 2, 1});
}

TEST(Gradients, CnnMatchesFiniteDifference) {
  Model m = SmallCnn(12);
  Rng rng(13);
  Tensor batch = Tensor::FromData({3, 1, 6, 6}, testing::RandomVector(108, rng, 0, 1));
  CheckParameterGradients(m, batch, {0, 3, 2});
}

TEST(SampleVjp, MatchesFiniteDifferenceOfSeededLogits) {
  Rng rng(14);
  Model m = Model::Init(MlpArchitecture(4, {6}, 3), rng);
  const std::vector<double> x = testing::RandomVector(4, rng, 0, 1);
  const std::vector<double> seed = {0.3, -1.0, 0.5};
  std::vector<double> grad;
  const auto z = m.SampleVjp(x, [&](std::span<const double>) { return seed; }, grad);
  EXPECT_EQ(z, m.SampleLogits(x));
  auto f = [&](const std::vector<double>& v) {
    const auto zz = m.SampleLogits(v);
    return seed[0] * zz[0] + seed[1] * zz[1] + seed[2] * zz[2];
  };
  EXPECT_LT(MaxRelError(grad, NumericGradient(f, x)), 1e-6);
}

TEST(Accuracy, CountsMatches) {
  Model m = Model::FromParameters(MlpArchitecture(2, {}, 2), {{1, 0, 0, 1}, {0, 0}});
  Tensor x = Tensor::FromData({4, 2}, {1, 0, 0, 1, 1, 0, 0, 1});
  const std::vector<int> labels = {0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(Accuracy(m, x, labels), 0.75);
}

}  // namespace
}  // namespace sensireg
