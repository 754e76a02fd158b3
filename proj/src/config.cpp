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
#include "sensireg/config.hpp"

#include <algorithm>
#include <filesystem>

#include "json.hpp"
#include "sensireg/error.hpp"

namespace sensireg {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void Bad(const std::string& field, const std::string& msg) {
  Fail(ErrorCode::kInvalidConfig, "config field '" + field + "': " + msg);
}

std::string JacobModeName(JacobianMode m) {
  return m == JacobianMode::kExact ? "exact" : "fd";
}

std::string SyntheticName(SyntheticKind k) { return k == SyntheticKind::kCircles ? "circles" : "blobs"; }

// Hyperparameters for MNIST-style IDX data, with smaller-scale fallbacks for
// the 2-D synthetic tasks.
RunConfig Defaults(const std::string& command, const std::string& source) {
  RunConfig c;
  c.command = command;
  c.data.source = source;
  c.train.weights = {2.0, 0.01};
  c.train.ns.ns_eps = 1.0;
  c.train.ns.n_samples = 5;
  if (source == "idx") {
    c.model.arch = "cnn";
    c.model.hidden = {64};
    c.model.conv_filters = {8, 16};
    c.train.learning_rate = 1e-3;
    c.train.epochs = 5;
    c.train.batch_size = 64;
    c.data.split = {0.9, 0.1};
  } else {
    c.train.learning_rate = 1e-2;
    c.train.epochs = 30;
    c.train.batch_size = 32;
    c.train.ns.ns_eps = 0.1;
    c.train.weights = {1.0, 0.01};
    c.attack.cw.steps = 200;
    c.attack.restarts.n_restarts = 20;
    c.attack.restarts.init_radius = 0.1;
    c.data.synthetic.n = 2000;
    c.n_samples = 200;
  }
  return c;
}

json ToJson(const RunConfig& c) {
  const auto& s = c.data.synthetic;
  const auto& a = c.attack;
  return {
      {"command", c.command},
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"workers", c.workers},
      {"model_id", c.model_id},
      {"n_samples", c.n_samples},
      {"sample_index", c.sample_index},
      {"format", c.format},
      {"regularizer", c.regularizer},
      {"data",
       {{"source", c.data.source},
        {"kind", SyntheticName(s.kind)},
        {"n", s.n},
        {"dim", s.dim},
        {"num_classes", s.num_classes},
        {"noise_std", s.noise_std},
        {"center_box", s.center_box},
        {"images", c.data.images},
        {"labels", c.data.labels},
        {"test_images", c.data.test_images},
        {"test_labels", c.data.test_labels},
        {"split", c.data.split},
        {"limit", c.data.limit},
        {"test_limit", c.data.test_limit}}},
      {"model",
       {{"arch", c.model.arch},
        {"hidden", c.model.hidden},
        {"conv_filters", c.model.conv_filters},
        {"kernel", c.model.kernel}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"lambda_ns", c.train.weights.lambda_ns},
        {"lambda_jacob", c.train.weights.lambda_jacob},
        {"ns_eps", c.train.ns.ns_eps},
        {"ns_samples", c.train.ns.n_samples},
        {"ns_layers", c.train.ns.layers},
        {"jacob_projections", c.train.jr.n_projections},
        {"jacob_step", c.train.jr.fd_step},
        {"jacob_mode", JacobModeName(c.train.jr.mode)}}},
      {"attack",
       {{"kind", AttackKindName(a.kind)},
        {"name", a.name},
        {"targeted", a.targeted},
        {"target_class", a.target_class ? *a.target_class : -1},
        {"pgd",
         {{"eps", a.pgd.eps},
          {"step_size", a.pgd.step_size},
          {"n_iter", a.pgd.n_iter},
          {"rand_init", a.pgd.rand_init}}},
        {"cw",
         {{"steps", a.cw.steps},
          {"step_size", a.cw.step_size},
          {"initial_const", a.cw.initial_const},
          {"binary_search_steps", a.cw.binary_search_steps},
          {"confidence", a.cw.confidence}}},
        {"restarts", {{"n_restarts", a.restarts.n_restarts}, {"init_radius", a.restarts.init_radius}}},
        {"ge", {{"sample_count", a.ge.sample_count}, {"eps", a.ge.eps}}},
        {"hsj",
         {{"max_iter", a.hsj.max_iter},
          {"init_grad_queries", a.hsj.init_grad_queries},
          {"init_size", a.hsj.init_size},
          {"theta", a.hsj.theta},
          {"max_step_halvings", a.hsj.max_step_halvings}}}}},
      {"sweep", {{"budgets", c.sweep.budgets}}},
      {"paths",
       {{"model", c.paths.model},
        {"source_model", c.paths.source_model},
        {"target_model", c.paths.target_model},
        {"reports", c.paths.reports},
        {"output", c.paths.output}}},
  };
}

// Every key present in `user` must exist in `schema` with a compatible kind.
void CheckKeys(const json& user, const json& schema, const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string field = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.contains(it.key())) Bad(field, "unknown key");
    const json& expect = schema.at(it.key());
    if (expect.is_object()) {
      if (!it->is_object()) Bad(field, "expected an object");
      CheckKeys(*it, expect, field);
    }
  }
}

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json& At(const std::string& path) const {
    const json* node = &root_;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot - start);
      if (!node->is_object() || !node->contains(key)) Bad(path, "missing");
      node = &node->at(key);
      if (dot == std::string::npos) return *node;
      start = dot + 1;
    }
  }
  std::string Str(const std::string& path) const {
    const json& j = At(path);
    if (!j.is_string()) Bad(path, "expected a string");
    return j.get<std::string>();
  }
  double Num(const std::string& path) const {
    const json& j = At(path);
    if (!j.is_number()) Bad(path, "expected a number");
    return j.get<double>();
  }
  uint64_t Unsigned(const std::string& path) const {
    const json& j = At(path);
    if (!j.is_number_unsigned()) Bad(path, "expected a non-negative integer");
    return j.get<uint64_t>();
  }
  int Int(const std::string& path) const {
    const json& j = At(path);
    if (!j.is_number_integer()) Bad(path, "expected an integer");
    return j.get<int>();
  }
  bool Bool(const std::string& path) const {
    const json& j = At(path);
    if (!j.is_boolean()) Bad(path, "expected true or false");
    return j.get<bool>();
  }
  std::vector<double> Nums(const std::string& path) const {
    const json& j = At(path);
    if (!j.is_array()) Bad(path, "expected an array");
    std::vector<double> out;
    for (const json& e : j) {
      if (!e.is_number()) Bad(path, "expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<std::size_t> Sizes(const std::string& path) const {
    const json& j = At(path);
    if (!j.is_array()) Bad(path, "expected an array");
    std::vector<std::size_t> out;
    for (const json& e : j) {
      if (!e.is_number_unsigned() || e.get<uint64_t>() == 0) Bad(path, "expected positive integers");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }
  std::vector<std::string> Strs(const std::string& path) const {
    const json& j = At(path);
    if (!j.is_array()) Bad(path, "expected an array");
    std::vector<std::string> out;
    for (const json& e : j) {
      if (!e.is_string()) Bad(path, "expected strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

 private:
  const json& root_;
};

RunConfig FromJson(const json& j, const std::string& command) {
  Reader r(j);
  RunConfig c;
  c.command = command;
  c.seed = r.Unsigned("seed");
  c.out_dir = r.Str("out_dir");
  c.workers = r.Unsigned("workers");
  c.model_id = r.Str("model_id");
  c.n_samples = r.Unsigned("n_samples");
  c.sample_index = r.Unsigned("sample_index");
  c.format = r.Str("format");
  c.regularizer = r.Str("regularizer");

  c.data.source = r.Str("data.source");
  auto& s = c.data.synthetic;
  try {
    s.kind = SyntheticKindFromName(r.Str("data.kind"));
  } catch (const Error& e) {
    Bad("data.kind", e.what());
  }
  s.n = r.Unsigned("data.n");
  s.dim = r.Unsigned("data.dim");
  s.num_classes = r.Unsigned("data.num_classes");
  s.noise_std = r.Num("data.noise_std");
  s.center_box = r.Num("data.center_box");
  s.seed = c.seed;
  c.data.images = r.Str("data.images");
  c.data.labels = r.Str("data.labels");
  c.data.test_images = r.Str("data.test_images");
  c.data.test_labels = r.Str("data.test_labels");
  c.data.split = r.Nums("data.split");
  c.data.limit = r.Unsigned("data.limit");
  c.data.test_limit = r.Unsigned("data.test_limit");

  c.model.arch = r.Str("model.arch");
  c.model.hidden = r.Sizes("model.hidden");
  c.model.conv_filters = r.Sizes("model.conv_filters");
  c.model.kernel = r.Unsigned("model.kernel");

  auto& t = c.train;
  t.learning_rate = r.Num("train.learning_rate");
  t.epochs = r.Int("train.epochs");
  t.batch_size = r.Unsigned("train.batch_size");
  t.weights.lambda_ns = r.Num("train.lambda_ns");
  t.weights.lambda_jacob = r.Num("train.lambda_jacob");
  t.ns.ns_eps = r.Num("train.ns_eps");
  t.ns.n_samples = r.Int("train.ns_samples");
  t.ns.layers = r.Strs("train.ns_layers");
  t.jr.n_projections = r.Int("train.jacob_projections");
  t.jr.fd_step = r.Num("train.jacob_step");
  const std::string mode = r.Str("train.jacob_mode");
  if (mode == "fd")
    t.jr.mode = JacobianMode::kFiniteDifference;
  else if (mode == "exact")
    t.jr.mode = JacobianMode::kExact;
  else
    Bad("train.jacob_mode", "expected fd or exact, got '" + mode + "'");
  t.seed = c.seed;

  auto& a = c.attack;
  try {
    a.kind = AttackKindFromName(r.Str("attack.kind"));
  } catch (const Error& e) {
    Bad("attack.kind", e.what());
  }
  a.name = r.Str("attack.name");
  a.targeted = r.Bool("attack.targeted");
  const int tc = r.Int("attack.target_class");
  if (tc >= 0) a.target_class = tc;
  a.pgd.eps = r.Num("attack.pgd.eps");
  a.pgd.step_size = r.Num("attack.pgd.step_size");
  a.pgd.n_iter = r.Int("attack.pgd.n_iter");
  a.pgd.rand_init = r.Bool("attack.pgd.rand_init");
  a.cw.steps = r.Int("attack.cw.steps");
  a.cw.step_size = r.Num("attack.cw.step_size");
  a.cw.initial_const = r.Num("attack.cw.initial_const");
  a.cw.binary_search_steps = r.Int("attack.cw.binary_search_steps");
  a.cw.confidence = r.Num("attack.cw.confidence");
  a.restarts.n_restarts = r.Int("attack.restarts.n_restarts");
  a.restarts.init_radius = r.Num("attack.restarts.init_radius");
  a.ge.sample_count = r.Int("attack.ge.sample_count");
  a.ge.eps = r.Num("attack.ge.eps");
  a.hsj.max_iter = r.Int("attack.hsj.max_iter");
  a.hsj.init_grad_queries = r.Int("attack.hsj.init_grad_queries");
  a.hsj.init_size = r.Int("attack.hsj.init_size");
  a.hsj.theta = r.Num("attack.hsj.theta");
  a.hsj.max_step_halvings = r.Int("attack.hsj.max_step_halvings");
  a.seed = c.seed;

  c.sweep.budgets = r.Nums("sweep.budgets");

  c.paths.model = r.Str("paths.model");
  c.paths.source_model = r.Str("paths.source_model");
  c.paths.target_model = r.Str("paths.target_model");
  c.paths.reports = r.Strs("paths.reports");
  c.paths.output = r.Str("paths.output");
  return c;
}

// Re-raises a module validation failure as a config error on `group`.
template <typename Fn>
void ValidateGroup(const std::string& group, Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    Bad(group, e.what());
  }
}

void RequireFile(const std::string& field, const std::string& path) {
  if (path.empty()) Bad(field, "required");
  if (!fs::is_regular_file(path)) Bad(field, "no such file '" + path + "'");
}

void Validate(const RunConfig& c) {
  if (c.data.source != "synthetic" && c.data.source != "idx")
    Bad("data.source", "expected synthetic or idx, got '" + c.data.source + "'");
  if (c.model.arch != "mlp" && c.model.arch != "cnn")
    Bad("model.arch", "expected mlp or cnn, got '" + c.model.arch + "'");
  if (c.format != "csv" && c.format != "json") Bad("format", "expected csv or json");
  if (c.n_samples == 0) Bad("n_samples", "must be positive");
  const auto& split = c.data.split;
  if (split.empty() || split.size() > 3) Bad("data.split", "expected 1 to 3 fractions");
  double sum = 0.0;
  for (double f : split) {
    if (!(f > 0.0)) Bad("data.split", "fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) Bad("data.split", "fractions must sum to 1");
  ValidateGroup("train", [&] { c.train.Validate(); });
  ValidateGroup("attack", [&] { c.attack.Validate(); });
  ValidateGroup("sweep.budgets", [&] { c.sweep.Validate(); });
  ValidateGroup("regularizer", [&] { RegularizerIdFromName(c.regularizer); });

  const std::string& cmd = c.command;
  if (cmd != "report" && c.data.source == "idx") {
    RequireFile("data.images", c.data.images);
    RequireFile("data.labels", c.data.labels);
    if (!c.data.test_images.empty() || !c.data.test_labels.empty()) {
      RequireFile("data.test_images", c.data.test_images);
      RequireFile("data.test_labels", c.data.test_labels);
    }
  }
  if (cmd == "robustify" || cmd == "lambda-search" || cmd == "attack" || cmd == "evaluate")
    RequireFile("paths.model", c.paths.model);
  if (cmd == "transfer") {
    RequireFile("paths.source_model", c.paths.source_model);
    RequireFile("paths.target_model", c.paths.target_model);
  }
  if (cmd == "report") {
    if (c.paths.reports.empty()) Bad("paths.reports", "required");
    for (const auto& p : c.paths.reports) RequireFile("paths.reports", p);
  }
}

json ParseOverrideValue(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;  // bare words are strings
  }
}

void ApplyOverride(json& user, const std::string& item) {
  const std::size_t eq = item.find('=');
  if (eq == std::string::npos || eq == 0)
    Fail(ErrorCode::kInvalidConfig, "override '" + item + "' is not key=value");
  const std::string key = item.substr(0, eq);
  json* node = &user;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) Bad(key, "empty path component");
    if (dot == std::string::npos) {
      (*node)[part] = ParseOverrideValue(item.substr(eq + 1));
      return;
    }
    json& child = (*node)[part];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) Bad(key.substr(0, dot), "expected an object");
    node = &child;
    start = dot + 1;
  }
}

Dataset Head(const Dataset& ds, std::size_t limit) {
  if (limit == 0 || limit >= ds.size()) return ds;
  std::vector<std::size_t> idx(limit);
  for (std::size_t i = 0; i < limit; ++i) idx[i] = i;
  return ds.Subset(idx);
}

}  // namespace

bool IsCommand(const std::string& command) {
  return std::find(std::begin(kCommands), std::end(kCommands), command) != std::end(kCommands);
}

RunConfig ResolveConfig(const std::string& command, const std::string& config_json,
                        const std::vector<std::string>& overrides) {
  if (!IsCommand(command)) Fail(ErrorCode::kInvalidConfig, "unknown command '" + command + "'");
  json user = json::object();
  if (!config_json.empty()) {
    try {
      user = json::parse(config_json);
    } catch (const json::exception& e) {
      Fail(ErrorCode::kInvalidConfig, std::string("config is not valid JSON: ") + e.what());
    }
    if (!user.is_object()) Fail(ErrorCode::kInvalidConfig, "config must be a JSON object");
  }
  // The resolved config is echoed with its command; accept it back.
  if (user.contains("command")) {
    if (user["command"] != command) Bad("command", "config was resolved for a different command");
    user.erase("command");
  }
  for (const auto& o : overrides) ApplyOverride(user, o);

  std::string source = "synthetic";
  if (user.contains("data") && user["data"].is_object() && user["data"].contains("source") &&
      user["data"]["source"].is_string())
    source = user["data"]["source"].get<std::string>();

  json merged = ToJson(Defaults(command, source));
  CheckKeys(user, merged, "");
  merged.merge_patch(user);
  RunConfig cfg = FromJson(merged, command);
  Validate(cfg);
  return cfg;
}

std::string RunConfigToJson(const RunConfig& cfg) { return ToJson(cfg).dump(2) + "\n"; }

DataSplits LoadData(const RunConfig& cfg) {
  const DataConfig& d = cfg.data;
  Dataset primary = d.source == "idx" ? LoadIdx(d.images, d.labels) : GenerateSynthetic(d.synthetic);
  primary = Head(primary, d.limit);
  DataSplits out;
  const bool separate_test = d.source == "idx" && !d.test_images.empty();
  auto parts = Split(primary, d.split, cfg.seed);
  if (separate_test) {
    Require(d.split.size() <= 2, "data.split: with a separate test set give train[,val] fractions",
            ErrorCode::kInvalidConfig);
    out.train = std::move(parts[0]);
    if (parts.size() == 2) out.val = std::move(parts[1]);
    out.test = Head(LoadIdx(d.test_images, d.test_labels), d.test_limit);
    out.test.tag = "test";
  } else {
    Require(d.split.size() >= 2, "data.split: need at least train and test fractions",
            ErrorCode::kInvalidConfig);
    out.train = std::move(parts[0]);
    if (parts.size() == 3) out.val = std::move(parts[1]);
    out.test = Head(parts.back(), d.test_limit);
  }
  out.train.tag = "train";
  if (out.val) out.val->tag = "val";
  // Class count comes from the primary set so that every split agrees.
  Require(out.test.num_classes <= out.train.num_classes || out.test.num_classes == 0,
          "test set has more classes than the training set", ErrorCode::kInvalidConfig);
  out.test.num_classes = out.train.num_classes;
  if (out.val) out.val->num_classes = out.train.num_classes;
  return out;
}

Architecture BuildArchitecture(const ModelConfig& cfg, const Shape& input_shape,
                               std::size_t num_classes) {
  if (cfg.arch == "cnn") {
    Require(input_shape.size() == 3, "model.arch cnn needs [C, H, W] inputs", ErrorCode::kInvalidConfig);
    return CnnArchitecture(input_shape, cfg.conv_filters, cfg.kernel, cfg.hidden, num_classes);
  }
  std::size_t dim = 1;
  for (std::size_t s : input_shape) dim *= s;
  Architecture a = MlpArchitecture(dim, cfg.hidden, num_classes);
  if (input_shape.size() > 1) {
    a.input_shape = input_shape;
    a.layers.insert(a.layers.begin(), LayerSpec::Flatten("flatten"));
  }
  return a;
}

}  // namespace sensireg
