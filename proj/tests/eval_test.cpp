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

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "sensireg/error.hpp"
#include "sensireg/eval.hpp"
#include "sensireg/trainer.hpp"
#include "test_util.hpp"

namespace sensireg {
namespace {

struct Fixture {
  Dataset data;
  Model model;
};

// Small 3-class blobs problem with a trained MLP.
const Fixture& Trained() {
  static const Fixture f = [] {
    SyntheticSpec s;
    s.n = 300;
    s.num_classes = 3;
    s.noise_std = 1.5;
    s.seed = 42;
    Dataset d = GenerateSynthetic(s);
    d.tag = "test";
    Rng rng(1);
    Model m = Model::Init(MlpArchitecture(2, {16}, 3), rng);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 20;
    Model trained = Pretrain(m, d, nullptr, cfg).model;
    return Fixture{std::move(d), std::move(trained)};
  }();
  return f;
}

AttackConfig FastCw() {
  AttackConfig a;
  a.kind = AttackKind::kCw;
  a.cw.steps = 100;
  a.cw.binary_search_steps = 5;
  return a;
}

TEST(BudgetSweep, Validation) {
  EXPECT_NO_THROW(BudgetSweep{}.Validate());
  EXPECT_EQ(BudgetSweep{}.budgets.size(), 10u);
  EXPECT_THROW(BudgetSweep{{}}.Validate(), Error);
  EXPECT_THROW((BudgetSweep{{0.1, 0.1}}.Validate()), Error);
  EXPECT_THROW((BudgetSweep{{0.0, 1.0}}.Validate()), Error);
  EXPECT_THROW((BudgetSweep{{1.0, 0.5}}.Validate()), Error);
}

TEST(Protocol, TargetedInstanceCounts) {
  SyntheticSpec s;
  s.n = 500;
  s.num_classes = 10;
  Dataset d10 = GenerateSynthetic(s);
  const auto t10 = TargetedInstances(d10, kTargetedSamples, 42);
  EXPECT_EQ(t10.size(), 1017u);
  s.num_classes = 2;
  Dataset d2 = GenerateSynthetic(s);
  EXPECT_EQ(TargetedInstances(d2, kTargetedSamples, 42).size(), 113u);
  std::set<std::size_t> samples;
  for (const auto& inst : t10) {
    ASSERT_TRUE(inst.target.has_value());
    EXPECT_NE(*inst.target, inst.label);
    EXPECT_EQ(inst.label, d10.labels[inst.sample_index]);
    samples.insert(inst.sample_index);
  }
  EXPECT_EQ(samples.size(), kTargetedSamples);
  EXPECT_THROW(TargetedInstances(d10, 501, 42), Error);
  Dataset d1 = d2;
  d1.num_classes = 1;
  EXPECT_THROW(TargetedInstances(d1, 10, 42), Error);
}

TEST(Protocol, UntargetedSamplesAreSeededAndDistinct) {
  const Dataset& d = Trained().data;
  const auto a = UntargetedInstances(d, 100, 42);
  const auto b = UntargetedInstances(d, 100, 42);
  const auto c = UntargetedInstances(d, 100, 43);
  std::set<std::size_t> seen;
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sample_index, b[i].sample_index);
    differs |= a[i].sample_index != c[i].sample_index;
    seen.insert(a[i].sample_index);
    EXPECT_FALSE(a[i].target.has_value());
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_THROW(UntargetedInstances(d, d.size() + 1, 42), Error);
}

TEST(Sweep, ThresholdSemantics) {
  const Fixture& f = Trained();
  const std::size_t n = 60;
  BudgetSweep sweep{{1e-9, 1e6}};
  const EvalReport r = AdversarialTestAccuracySweep(f.model, FastCw(), f.data, sweep, n, {});
  ASSERT_EQ(r.rows.size(), 2u);
  // Tiny budget: only clean-correct samples remain correct.
  std::size_t clean_correct = 0;
  for (const auto& inst : UntargetedInstances(f.data, n, 42))
    clean_correct += f.model.Predict(f.data.SampleView(inst.sample_index)) == inst.label;
  EXPECT_EQ(r.rows[0].n_correct, clean_correct);
  EXPECT_EQ(r.rows[0].n, n);
  // An unbounded 2-D C&W run succeeds everywhere.
  EXPECT_EQ(r.rows[1].n_correct, 0u);
  EXPECT_GT(r.rows[1].mean_dist, 0.0);
  EXPECT_EQ(r.metadata.dataset, "test");
  EXPECT_EQ(r.metadata.seed, 42u);
}

TEST(Sweep, AccuracyNonIncreasingInBudget) {
  const Fixture& f = Trained();
  for (AttackKind k : {AttackKind::kCw, AttackKind::kHopSkipJump, AttackKind::kPgd}) {
    AttackConfig a = FastCw();
    a.kind = k;
    a.hsj.max_iter = 10;
    a.pgd.n_iter = 30;
    const EvalReport r = AdversarialTestAccuracySweep(f.model, a, f.data, BudgetSweep{}, 40, {});
    ASSERT_EQ(r.rows.size(), 10u);
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
      EXPECT_LT(r.rows[i - 1].epsilon, r.rows[i].epsilon);
      if (k != AttackKind::kPgd)
        EXPECT_LE(r.rows[i].accuracy(), r.rows[i - 1].accuracy()) << AttackKindName(k);
    }
    // PGD runs independently per budget; the endpoints still bracket.
    EXPECT_LE(r.rows.back().accuracy(), r.rows.front().accuracy());
    EXPECT_EQ(r.rows[0].attack, AttackKindName(k));
  }
}

TEST(Sweep, PgdRunsOncePerBudget) {
  const Fixture& f = Trained();
  AttackConfig a;
  a.kind = AttackKind::kPgd;
  a.pgd.n_iter = 10;
  const std::size_t n = 20;
  const CandidateSet c = GenerateCandidates(f.model, a, f.data, BudgetSweep{{0.1, 0.5, 1.0}},
                                            UntargetedInstances(f.data, n, 42), {});
  EXPECT_TRUE(c.per_budget);
  ASSERT_EQ(c.slots.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < n; ++i)
      if (c.slots[s][i].distance > 0)
        EXPECT_LE(c.slots[s][i].distance, c.sweep.budgets[s] + 1e-5);
  a.kind = AttackKind::kCw;
  const CandidateSet m = GenerateCandidates(f.model, a, f.data, BudgetSweep{{0.1, 0.5, 1.0}},
                                            UntargetedInstances(f.data, n, 42), {});
  EXPECT_FALSE(m.per_budget);
  EXPECT_EQ(m.slots.size(), 1u);
}

TEST(Sweep, TargetedSweepReachesTargets) {
  const Fixture& f = Trained();
  const EvalReport r = TargetedSweep(f.model, FastCw(), f.data, BudgetSweep{{0.05, 1e6}}, {}, 20);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].n, 40u);
  EXPECT_TRUE(r.rows[0].targeted);
  EXPECT_LE(r.rows[1].n_correct, r.rows[0].n_correct);
  // Targeted HopSkipJump gets a starting pool from the data.
  AttackConfig h;
  h.kind = AttackKind::kHopSkipJump;
  h.hsj.max_iter = 5;
  const EvalReport rh = TargetedSweep(f.model, h, f.data, BudgetSweep{{1e6}}, {}, 10);
  EXPECT_EQ(rh.rows[0].n_correct, 0u);
}

TEST(Transfer, SelfTransferMatchesDirectSweep) {
  const Fixture& f = Trained();
  for (bool targeted : {false, true}) {
    AttackConfig a = FastCw();
    a.targeted = targeted;
    const EvalReport direct =
        AdversarialTestAccuracySweep(f.model, a, f.data, BudgetSweep{}, 30, {});
    const EvalReport self =
        TransferabilityEval(f.model, f.model, a, f.data, BudgetSweep{}, 30, {});
    EXPECT_EQ(direct, self);
  }
}

TEST(Transfer, CandidatesReusedAcrossTargets) {
  const Fixture& f = Trained();
  const CandidateSet c = GenerateCandidates(f.model, FastCw(), f.data, BudgetSweep{},
                                            UntargetedInstances(f.data, 30, 42), {});
  const CandidateSet copy = c;
  Rng rng(9);
  Model other = Model::Init(MlpArchitecture(2, {16}, 3), rng);
  const auto r1 = ScoreTransfer(c, other, f.data);
  const auto r2 = ScoreTransfer(c, f.model, f.data);
  // scoring never touches the candidates
  for (std::size_t i = 0; i < c.instances.size(); ++i)
    EXPECT_EQ(c.slots[0][i].candidate, copy.slots[0][i].candidate);
  EXPECT_EQ(r2, ScoreDirect(c));
  EXPECT_EQ(r1.size(), r2.size());
  Model wrong = Model::Init(MlpArchitecture(2, {16}, 4), rng);
  EXPECT_THROW(TransferabilityEval(f.model, wrong, FastCw(), f.data, BudgetSweep{}, 10, {}),
               Error);
}

TEST(Sweep, WorkerCountDoesNotChangeResults) {
  const Fixture& f = Trained();
  AttackConfig a = FastCw();
  a.kind = AttackKind::kCwRestarts;
  a.restarts.n_restarts = 2;
  EvalOptions one{42, 1}, four{42, 4};
  const EvalReport r1 = AdversarialTestAccuracySweep(f.model, a, f.data, BudgetSweep{}, 24, one);
  const EvalReport r4 = AdversarialTestAccuracySweep(f.model, a, f.data, BudgetSweep{}, 24, four);
  EXPECT_EQ(ReportToCsv(r1), ReportToCsv(r4));
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  ParallelFor(hits.size(), 7, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  ParallelFor(0, 4, [](std::size_t) { FAIL(); });
  EXPECT_THROW(ParallelFor(10, 3, [](std::size_t i) {
                 if (i == 5) throw Error(ErrorCode::kNumerical, "boom");
               }),
               Error);
}

EvalReport SampleReport() {
  EvalReport r;
  r.metadata = {"robust_ns", "test", 42, ""};
  r.rows.push_back({"cw", false, 0.1, 37, 40, 0.0123456789012345, 12345});
  r.rows.push_back({"cw", false, 1.0, 3, 40, 1.0 / 3.0, 12345});
  r.rows.push_back({"pgd \"x\",y", true, 20.0, 0, 7, 0.0, 0});
  return r;
}

TEST(Report, CsvLayoutAndRoundTrip) {
  const EvalReport r = SampleReport();
  const std::string csv = ReportToCsv(r);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kReportCsvHeader);
  std::getline(in, line);
  EXPECT_EQ(line, "cw,false,0.1,0.9250,40,0.0123456789012345,12345");
  const EvalReport back = ReportFromCsv(csv);
  EXPECT_EQ(back.rows, r.rows);
  EXPECT_EQ(ReportToCsv(back), csv);
}

TEST(Report, AccuracyPrintedWithFourDecimals) {
  EvalReport r;
  r.rows.push_back({"cw", false, 1.0, 1, 3, 0.5, 1});
  EXPECT_NE(ReportToCsv(r).find(",0.3333,3,"), std::string::npos);
}

TEST(Report, EmptyReportIsHeaderOnly) {
  const EvalReport empty;
  EXPECT_EQ(ReportToCsv(empty), std::string(kReportCsvHeader) + "\n");
  EXPECT_TRUE(ReportFromCsv(ReportToCsv(empty)).rows.empty());
  EXPECT_TRUE(ReportFromJson(ReportToJson(empty)).rows.empty());
}

TEST(Report, JsonRoundTripKeepsMetadata) {
  EvalReport r = SampleReport();
  r.metadata.timestamp = "1700000000";
  const EvalReport back = ReportFromJson(ReportToJson(r));
  EXPECT_EQ(back, r);
  EXPECT_EQ(ReportToJson(back), ReportToJson(r));
}

TEST(Report, MalformedInputIsCorruptFile) {
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return static_cast<ErrorCode>(0);
  };
  EXPECT_EQ(code([] { ReportFromCsv("a,b,c\n"); }), ErrorCode::kCorruptFile);
  EXPECT_EQ(code([] { ReportFromCsv(std::string(kReportCsvHeader) + "\ncw,false,x,0.5,2,0,0\n"); }),
            ErrorCode::kCorruptFile);
  EXPECT_EQ(code([] { ReportFromCsv(std::string(kReportCsvHeader) + "\ncw,false,1\n"); }),
            ErrorCode::kCorruptFile);
  EXPECT_EQ(code([] { ReportFromJson("{\"rows\": 3}"); }), ErrorCode::kCorruptFile);
}

TEST(Report, FilesAndFormats) {
  const auto dir = std::filesystem::temp_directory_path() / "sensireg_eval_test";
  std::filesystem::create_directories(dir);
  const EvalReport r = SampleReport();
  EXPECT_EQ(ReportFormatFromPath("a/b.csv"), ReportFormat::kCsv);
  EXPECT_EQ(ReportFormatFromPath("b.json"), ReportFormat::kJson);
  EXPECT_THROW(ReportFormatFromPath("b.txt"), Error);
  EmitReport(r, dir / "r.csv", ReportFormat::kCsv);
  EmitReport(r, dir / "r.json", ReportFormat::kJson);
  EXPECT_EQ(ReadReport(dir / "r.csv").rows, r.rows);
  EXPECT_EQ(ReadReport(dir / "r.json"), r);
  try {
    EmitReport(r, dir / "missing" / "deeper" / "r.csv", ReportFormat::kCsv);
    ADD_FAILURE() << "expected an I/O error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("deeper"), std::string::npos);
  }
  EXPECT_THROW(ReadReport(dir / "nope.csv"), Error);
  std::filesystem::remove_all(dir);
}

TEST(Report, SortRowsOrdersByKey) {
  EvalReport r;
  r.rows.push_back({"pgd", false, 1.0, 0, 1, 0, 0});
  r.rows.push_back({"cw", true, 0.5, 0, 1, 0, 0});
  r.rows.push_back({"cw", false, 2.0, 0, 1, 0, 0});
  r.rows.push_back({"cw", false, 0.5, 0, 1, 0, 0});
  r.SortRows();
  EXPECT_EQ(r.rows[0].epsilon, 0.5);
  EXPECT_FALSE(r.rows[0].targeted);
  EXPECT_EQ(r.rows[1].epsilon, 2.0);
  EXPECT_TRUE(r.rows[2].targeted);
  EXPECT_EQ(r.rows[3].attack, "pgd");
}

TEST(Sweep, RepeatedRunsAreByteIdentical) {
  const Fixture& f = Trained();
  AttackConfig a;
  a.kind = AttackKind::kHopSkipJump;
  a.hsj.max_iter = 5;
  const auto r1 = AdversarialTestAccuracySweep(f.model, a, f.data, BudgetSweep{}, 20, {});
  const auto r2 = AdversarialTestAccuracySweep(f.model, a, f.data, BudgetSweep{}, 20, {});
  EXPECT_EQ(ReportToJson(r1), ReportToJson(r2));
}

}  // namespace
}  // namespace sensireg
