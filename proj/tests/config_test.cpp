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
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "sensireg/config.hpp"
#include "sensireg/error.hpp"

namespace sensireg {
namespace {

using json = nlohmann::json;

// Empty file under the temp dir; config validation only checks existence.
std::string TempFile(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "sensireg_config_test";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p).flush();
  return p.string();
}

// Message of the kInvalidConfig error raised by fn, or "" if none.
template <typename Fn>
std::string ConfigError(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "expected a config error";
  return "";
}

TEST(Config, CommandsAndDefaults) {
  for (const char* c : kCommands) EXPECT_TRUE(IsCommand(c));
  EXPECT_FALSE(IsCommand("train"));
  const RunConfig cfg = ResolveConfig("pretrain", "", {});
  EXPECT_EQ(cfg.command, "pretrain");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.data.source, "synthetic");
  EXPECT_EQ(cfg.sweep.budgets.size(), 10u);
  EXPECT_EQ(cfg.train.seed, 42u);
  EXPECT_EQ(cfg.attack.seed, 42u);
  EXPECT_EQ(cfg.data.synthetic.seed, 42u);
  ConfigError([] { ResolveConfig("fly", "", {}); });
}

TEST(Config, IdxDefaultsFollowMnistSettings) {
  json j;
  j["data"] = {{"source", "idx"}, {"images", TempFile("a")}, {"labels", TempFile("b")}};
  const RunConfig cfg = ResolveConfig("pretrain", j.dump(), {});
  EXPECT_EQ(cfg.model.arch, "cnn");
  EXPECT_EQ(cfg.train.weights.lambda_ns, 2.0);
  EXPECT_EQ(cfg.train.weights.lambda_jacob, 0.01);
  EXPECT_EQ(cfg.train.ns.ns_eps, 1.0);
  EXPECT_EQ(cfg.train.ns.n_samples, 5);
}

TEST(Config, UnknownKeyNamesTheField) {
  const std::string msg =
      ConfigError([] { ResolveConfig("pretrain", R"({"train": {"epoch": 3}})", {}); });
  EXPECT_NE(msg.find("train.epoch"), std::string::npos) << msg;
  EXPECT_NE(msg.find("unknown"), std::string::npos) << msg;
  const std::string top = ConfigError([] { ResolveConfig("pretrain", R"({"sede": 1})", {}); });
  EXPECT_NE(top.find("sede"), std::string::npos);
}

TEST(Config, WrongTypeNamesTheField) {
  const std::string msg = ConfigError(
      [] { ResolveConfig("pretrain", R"({"train": {"learning_rate": "fast"}})", {}); });
  EXPECT_NE(msg.find("train.learning_rate"), std::string::npos) << msg;
  ConfigError([] { ResolveConfig("pretrain", R"({"seed": -1})", {}); });
  ConfigError([] { ResolveConfig("pretrain", "[1, 2]", {}); });
  ConfigError([] { ResolveConfig("pretrain", "{not json", {}); });
}

TEST(Config, InvalidValuesAreConfigErrors) {
  ConfigError([] { ResolveConfig("pretrain", "", {"train.batch_size=0"}); });
  ConfigError([] { ResolveConfig("pretrain", "", {"sweep.budgets=[1.0, 0.5]"}); });
  ConfigError([] { ResolveConfig("pretrain", "", {"attack.kind=fgsm"}); });
  ConfigError([] { ResolveConfig("pretrain", "", {"train.jacob_mode=maybe"}); });
  ConfigError([] { ResolveConfig("pretrain", "", {"format=xml"}); });
  ConfigError([] { ResolveConfig("pretrain", "", {"no_equals_sign"}); });
}

TEST(Config, OverridesAreParsedAsJsonWithStringFallback) {
  const RunConfig cfg = ResolveConfig(
      "evaluate", R"({"train": {"epochs": 3}})",
      {"train.epochs=7", "attack.kind=hsj", "sweep.budgets=[0.5,1]", "paths.model=" + TempFile("m.sreg"),
       "model.hidden=[4]", "seed=9", "attack.pgd.rand_init=false"});
  EXPECT_EQ(cfg.train.epochs, 7);
  EXPECT_EQ(cfg.attack.kind, AttackKind::kHopSkipJump);
  EXPECT_EQ(cfg.sweep.budgets, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(cfg.paths.model, TempFile("m.sreg"));
  EXPECT_EQ(cfg.model.hidden, (std::vector<std::size_t>{4}));
  EXPECT_FALSE(cfg.attack.pgd.rand_init);
  // every seed follows the top-level one
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.train.seed, 9u);
  EXPECT_EQ(cfg.attack.seed, 9u);
  EXPECT_EQ(cfg.data.synthetic.seed, 9u);
}

TEST(Config, MissingPerCommandInputs) {
  EXPECT_NE(ConfigError([] { ResolveConfig("evaluate", "", {}); }).find("paths.model"),
            std::string::npos);
  EXPECT_NE(ConfigError([] { ResolveConfig("robustify", "", {}); }).find("paths.model"),
            std::string::npos);
  EXPECT_NE(ConfigError([] { ResolveConfig("transfer", "", {"paths.source_model=" + TempFile("a")}); })
                .find("paths.target_model"),
            std::string::npos);
  EXPECT_NE(ConfigError([] { ResolveConfig("report", "", {}); }).find("paths.reports"),
            std::string::npos);
  EXPECT_NE(ConfigError([] { ResolveConfig("pretrain", "", {"data.source=idx"}); })
                .find("data.images"),
            std::string::npos);
  EXPECT_NE(ConfigError([] { ResolveConfig("evaluate", "", {"paths.model=/nonexistent.sreg"}); })
                .find("no such file"),
            std::string::npos);
  EXPECT_NO_THROW(ResolveConfig("pretrain", "", {}));
}

TEST(Config, EchoRoundTrips) {
  const RunConfig cfg =
      ResolveConfig("evaluate", "", {"paths.model=" + TempFile("x.sreg"), "attack.kind=pgd", "seed=7"});
  const std::string echoed = RunConfigToJson(cfg);
  const json j = json::parse(echoed);
  EXPECT_EQ(j["command"], "evaluate");
  EXPECT_EQ(j["seed"], 7);
  const RunConfig back = ResolveConfig("evaluate", echoed, {});
  EXPECT_EQ(RunConfigToJson(back), echoed);
  // the echo is pinned to its command
  ConfigError([&] { ResolveConfig("attack", echoed, {}); });
}

TEST(Config, LoadSyntheticSplits) {
  const RunConfig cfg = ResolveConfig("pretrain", "", {"data.n=200"});
  const DataSplits s = LoadData(cfg);
  ASSERT_TRUE(s.val.has_value());
  EXPECT_EQ(s.train.size() + s.val->size() + s.test.size(), 200u);
  EXPECT_EQ(s.train.tag, "train");
  EXPECT_EQ(s.test.tag, "test");
  EXPECT_EQ(s.test.num_classes, s.train.num_classes);
  const RunConfig two = ResolveConfig("pretrain", "", {"data.n=200", "data.split=[0.8,0.2]"});
  EXPECT_FALSE(LoadData(two).val.has_value());
  const RunConfig one = ResolveConfig("pretrain", "", {"data.split=[1.0]"});
  ConfigError([&] { LoadData(one); });
}

TEST(Config, BuildArchitecture) {
  ModelConfig m;
  m.hidden = {8};
  const Architecture mlp = BuildArchitecture(m, {2}, 3);
  EXPECT_EQ(mlp.input_shape, (Shape{2}));
  // images through an MLP get flattened first
  const Architecture flat = BuildArchitecture(m, {1, 6, 6}, 10);
  EXPECT_EQ(flat.layers.front().id, "flatten");
  m.arch = "cnn";
  EXPECT_NO_THROW(BuildArchitecture(m, {1, 6, 6}, 10));
  ConfigError([&] { BuildArchitecture(m, {2}, 3); });
}

}  // namespace
}  // namespace sensireg
