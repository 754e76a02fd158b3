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
#ifndef SENSIREG_EVAL_HPP_
#define SENSIREG_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sensireg/attacks.hpp"
#include "sensireg/data_io.hpp"
#include "sensireg/model.hpp"

namespace sensireg {

struct BudgetSweep {
  std::vector<double> budgets{0.01, 0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0};

  // Non-empty, strictly ascending, positive.
  void Validate() const;
};

struct ReportRow {
  std::string attack;
  bool targeted = false;
  double epsilon = 0.0;
  std::size_t n_correct = 0;
  std::size_t n = 0;
  double mean_dist = 0.0;  // over instances adversarial at this budget
  uint64_t queries = 0;

  double accuracy() const {
    return n == 0 ? 0.0 : static_cast<double>(n_correct) / static_cast<double>(n);
  }
  bool operator==(const ReportRow&) const = default;
};

struct ReportMetadata {
  std::string model_id;
  std::string dataset;
  uint64_t seed = 42;
  std::string timestamp;

  bool operator==(const ReportMetadata&) const = default;
};

struct EvalReport {
  ReportMetadata metadata;
  std::vector<ReportRow> rows;

  // Orders rows by (attack, targeted, epsilon).
  void SortRows();
  bool operator==(const EvalReport&) const = default;
};

struct AttackInstance {
  std::size_t sample_index = 0;
  int label = 0;
  std::optional<int> target;
};

inline constexpr std::size_t kUntargetedSamples = 1024;
inline constexpr std::size_t kTargetedSamples = 113;

// First n entries of a seeded permutation of the dataset.
std::vector<AttackInstance> UntargetedInstances(const Dataset& dataset, std::size_t n_samples,
                                                uint64_t seed);
// n seeded samples, each paired with every class except its own.
std::vector<AttackInstance> TargetedInstances(const Dataset& dataset, std::size_t n_samples,
                                              uint64_t seed);

struct InstanceResult {
  bool success = false;
  double distance = 0.0;
  uint64_t queries = 0;
  std::vector<double> candidate;
};

// Attack outputs against one source model. Thresholded attacks fill a single
// slot; PGD fills one slot per budget.
struct CandidateSet {
  std::string attack_name;
  bool targeted = false;
  bool per_budget = false;
  BudgetSweep sweep;
  std::vector<AttackInstance> instances;
  std::vector<std::vector<InstanceResult>> slots;
};

struct EvalOptions {
  uint64_t seed = 42;        // sample selection
  std::size_t workers = 1;   // attack fan-out; results do not depend on it
};

CandidateSet GenerateCandidates(const Model& source, const AttackConfig& cfg,
                                const Dataset& dataset, const BudgetSweep& sweep,
                                std::vector<AttackInstance> instances,
                                const EvalOptions& opts);

// A sample is correct at budget eps unless the attack succeeded within eps.
std::vector<ReportRow> ScoreDirect(const CandidateSet& candidates);
// The candidate (when it succeeded within eps on the source) or the clean
// sample is classified by `target`.
std::vector<ReportRow> ScoreTransfer(const CandidateSet& candidates, const Model& target,
                                     const Dataset& dataset);

EvalReport AdversarialTestAccuracySweep(const Model& model, const AttackConfig& cfg,
                                        const Dataset& dataset, const BudgetSweep& sweep,
                                        std::size_t n_samples, const EvalOptions& opts);
EvalReport TargetedSweep(const Model& model, const AttackConfig& cfg, const Dataset& dataset,
                         const BudgetSweep& sweep, const EvalOptions& opts,
                         std::size_t n_samples = kTargetedSamples);
// Instances follow the targeted or untargeted protocol per cfg.targeted.
EvalReport TransferabilityEval(const Model& source, const Model& target,
                               const AttackConfig& cfg, const Dataset& dataset,
                               const BudgetSweep& sweep, std::size_t n_samples,
                               const EvalOptions& opts);

enum class ReportFormat { kCsv, kJson };
ReportFormat ReportFormatFromPath(const std::filesystem::path& path);

inline constexpr const char* kReportCsvHeader =
    "attack,targeted,epsilon,accuracy,n,mean_dist,queries";

std::string ReportToCsv(const EvalReport& report);
EvalReport ReportFromCsv(const std::string& text);
std::string ReportToJson(const EvalReport& report);
EvalReport ReportFromJson(const std::string& text);
void EmitReport(const EvalReport& report, const std::filesystem::path& path,
                ReportFormat format);
EvalReport ReadReport(const std::filesystem::path& path);

// Runs fn(i) for i in [0, n) on up to `workers` threads.
void ParallelFor(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace sensireg

#endif  // SENSIREG_EVAL_HPP_
