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
#ifndef SENSIREG_CONFIG_HPP_
#define SENSIREG_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sensireg/attacks.hpp"
#include "sensireg/data_io.hpp"
#include "sensireg/eval.hpp"
#include "sensireg/model.hpp"
#include "sensireg/trainer.hpp"

namespace sensireg {

inline constexpr const char* kCommands[] = {"pretrain", "robustify", "lambda-search", "attack",
                                            "evaluate", "transfer",  "report"};
bool IsCommand(const std::string& command);

struct DataConfig {
  std::string source = "synthetic";  // synthetic | idx
  SyntheticSpec synthetic;
  std::string images, labels;             // idx training pair
  std::string test_images, test_labels;   // idx test pair, optional
  std::vector<double> split{0.7, 0.15, 0.15};
  std::size_t limit = 0;       // keep the first `limit` primary samples (0 = all)
  std::size_t test_limit = 0;
};

struct ModelConfig {
  std::string arch = "mlp";  // mlp | cnn
  std::vector<std::size_t> hidden{32, 32};
  std::vector<std::size_t> conv_filters{8};
  std::size_t kernel = 3;
};

struct PathsConfig {
  std::string model;         // input checkpoint (robustify, lambda-search, attack, evaluate)
  std::string source_model;  // transfer
  std::string target_model;  // transfer
  std::vector<std::string> reports;  // report
  std::string output;  // optional explicit output file name
};

struct RunConfig {
  std::string command;
  uint64_t seed = 42;
  std::string out_dir = "out";
  std::size_t workers = 0;  // 0 = hardware concurrency
  std::string model_id;     // defaults to the checkpoint stem
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  std::string regularizer = "ns";  // lambda-search
  AttackConfig attack;
  BudgetSweep sweep;
  std::size_t n_samples = kUntargetedSamples;
  std::size_t sample_index = 0;  // attack
  std::string format = "csv";
  PathsConfig paths;
};

// Defaults, then `config_json` (may be empty), then dotted key=value
// overrides; every seed follows the top-level seed. Throws kInvalidConfig
// with the offending field on unknown keys, bad types, invalid values and
// missing per-command inputs.
RunConfig ResolveConfig(const std::string& command, const std::string& config_json,
                        const std::vector<std::string>& overrides);
std::string RunConfigToJson(const RunConfig& cfg);

struct DataSplits {
  Dataset train;
  std::optional<Dataset> val;
  Dataset test;
};
DataSplits LoadData(const RunConfig& cfg);

Architecture BuildArchitecture(const ModelConfig& cfg, const Shape& input_shape,
                               std::size_t num_classes);

}  // namespace sensireg

#endif  // SENSIREG_CONFIG_HPP_
