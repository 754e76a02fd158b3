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
// sensireg command-line driver. Talks to the library only through the C API.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sensireg/sensireg.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Failure {
  int exit_code;
  std::string message;
};

void Check(sr_status st, const std::string& what) {
  if (st == SR_OK) return;
  throw Failure{st == SR_INVALID_CONFIG ? kExitConfig : kExitRuntime,
                what + ": " + sr_last_error_message()};
}

// RAII holders for the opaque handles.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Config = Handle<sr_config, sr_config_free>;
using DatasetH = Handle<sr_dataset, sr_dataset_free>;
using ModelH = Handle<sr_model, sr_model_free>;
using ReportH = Handle<sr_report, sr_report_free>;

std::string TakeString(char* s) {
  std::string out(s ? s : "");
  sr_string_free(s);
  return out;
}

std::string JsonQuote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out += ch;
  }
  return out + "\"";
}

void WriteFile(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
  if (!out) throw Failure{kExitRuntime, "cannot write " + path.string()};
}

struct Options {
  std::string config_path;
  std::string seed;
  std::string out_dir;
  std::string workers;
  std::vector<std::string> overrides;
};

class Run {
 public:
  Run(std::string command, const Options& opts) : command_(std::move(command)), opts_(opts) {}

  void Resolve(const std::vector<std::string>& extra = {}) {
    std::string text;
    if (!opts_.config_path.empty()) {
      std::ifstream in(opts_.config_path, std::ios::binary);
      if (!in) throw Failure{kExitConfig, "--config: cannot read '" + opts_.config_path + "'"};
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    std::vector<std::string> ov;
    if (!opts_.seed.empty()) ov.push_back("seed=" + opts_.seed);
    if (!opts_.out_dir.empty()) ov.push_back("out_dir=" + JsonQuote(opts_.out_dir));
    if (!opts_.workers.empty()) ov.push_back("workers=" + opts_.workers);
    ov.insert(ov.end(), opts_.overrides.begin(), opts_.overrides.end());
    ov.insert(ov.end(), extra.begin(), extra.end());
    std::vector<const char*> argv;
    for (const auto& o : ov) argv.push_back(o.c_str());
    Config fresh;
    Check(sr_config_resolve(command_.c_str(), text.c_str(), argv.data(), argv.size(), fresh.out()),
          "config");
    std::swap(cfg_.p, fresh.p);
    extra_ = extra;
  }

  std::string Get(const std::string& key) const {
    char* s = nullptr;
    Check(sr_config_get(cfg_.get(), key.c_str(), &s), "config");
    return TakeString(s);
  }

  fs::path OutDir() {
    const fs::path dir = Get("out_dir");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Failure{kExitRuntime, "out_dir: cannot create '" + dir.string() + "': " + ec.message()};
    return dir;
  }

  // Fills model_id from a checkpoint stem when the user left it empty.
  void DefaultModelId(const std::string& id) {
    if (!Get("model_id").empty()) return;
    auto extra = extra_;
    extra.push_back("model_id=" + JsonQuote(id));
    Resolve(extra);
  }

  void EchoConfig(const fs::path& dir) {
    char* s = nullptr;
    Check(sr_config_to_json(cfg_.get(), &s), "config");
    WriteFile(dir / (command_ + "_config.json"), TakeString(s));
  }

  void LoadData(DatasetH& train, DatasetH& val, DatasetH& test) {
    Check(sr_data_load(cfg_.get(), train.out(), val.out(), test.out()), "data");
  }

  const sr_config* cfg() const { return cfg_.get(); }
  const std::string& command() const { return command_; }

 private:
  std::string command_;
  const Options& opts_;
  Config cfg_;
  std::vector<std::string> extra_;
};

std::string Stem(const std::string& path) { return fs::path(path).stem().string(); }

fs::path OutputFile(Run& run, const fs::path& dir, const std::string& fallback) {
  const std::string explicit_name = run.Get("paths.output");
  if (explicit_name.empty()) return dir / fallback;
  const fs::path p(explicit_name);
  return p.is_absolute() || p.has_parent_path() ? p : dir / p;
}

void LoadModel(const std::string& path, ModelH& model) {
  Check(sr_model_load(path.c_str(), model.out()), "load " + path);
}

void PrintAccuracy(const char* label, const sr_model* model, const sr_dataset* ds) {
  if (!ds) return;
  double acc = 0.0;
  Check(sr_model_accuracy(model, ds, &acc), "accuracy");
  std::printf("%s accuracy: %.4f\n", label, acc);
}

std::string ReportName(Run& run, const std::string& model_id) {
  std::string attack = run.Get("attack.name");
  if (attack.empty()) attack = run.Get("attack.kind");
  const bool targeted = run.Get("attack.targeted") == "true";
  const std::string ext = run.Get("format") == "json" ? ".json" : ".csv";
  return model_id + "_" + attack + "_" + (targeted ? "targeted" : "untargeted") + ext;
}

void Train(Run& run, bool robust) {
  run.Resolve();
  if (!robust) run.DefaultModelId("pretrained");
  else run.DefaultModelId(Stem(run.Get("paths.model")) + "_robust");
  const fs::path dir = run.OutDir();
  run.EchoConfig(dir);
  DatasetH train, val, test;
  run.LoadData(train, val, test);
  ModelH model;
  if (robust)
    LoadModel(run.Get("paths.model"), model);
  else
    Check(sr_model_create(run.cfg(), train.get(), model.out()), "model");
  const std::string id = run.Get("model_id");
  const fs::path log = dir / (id + "_train_log.csv");
  const auto fn = robust ? sr_robustify : sr_pretrain;
  Check(fn(run.cfg(), model.out(), train.get(), val.get(), log.string().c_str()), run.command());
  const fs::path ckpt = OutputFile(run, dir, id + ".sreg");
  Check(sr_model_save(model.get(), ckpt.string().c_str()), "save");
  PrintAccuracy("train", model.get(), train.get());
  PrintAccuracy("val", model.get(), val.get());
  PrintAccuracy("test", model.get(), test.get());
  std::printf("model: %s\nlog: %s\n", ckpt.string().c_str(), log.string().c_str());
}

void LambdaSearch(Run& run) {
  run.Resolve();
  const fs::path dir = run.OutDir();
  run.EchoConfig(dir);
  DatasetH train, val, test;
  run.LoadData(train, val, test);
  ModelH model;
  LoadModel(run.Get("paths.model"), model);
  char* s = nullptr;
  Check(sr_lambda_search(run.cfg(), model.get(), train.get(), val.get(), &s), "lambda-search");
  const std::string result = TakeString(s);
  const fs::path out = OutputFile(run, dir, "lambda_search.json");
  WriteFile(out, result);
  std::cout << result;
}

void Attack(Run& run) {
  run.Resolve();
  const fs::path dir = run.OutDir();
  run.EchoConfig(dir);
  DatasetH train, val, test;
  run.LoadData(train, val, test);
  ModelH model;
  LoadModel(run.Get("paths.model"), model);
  char* s = nullptr;
  Check(sr_attack_sample(run.cfg(), model.get(), test.get(), &s), "attack");
  const std::string result = TakeString(s);
  WriteFile(OutputFile(run, dir, "attack_result.json"), result);
  std::cout << result;
}

void WriteReport(Run& run, const fs::path& dir, const sr_report* report, const std::string& id) {
  const fs::path out = OutputFile(run, dir, ReportName(run, id));
  Check(sr_report_write(report, out.string().c_str()), "report");
  char* csv = nullptr;
  Check(sr_report_to_csv(report, &csv), "report");
  std::cout << TakeString(csv);
  std::printf("report: %s\n", out.string().c_str());
}

void Evaluate(Run& run) {
  run.Resolve();
  run.DefaultModelId(Stem(run.Get("paths.model")));
  const fs::path dir = run.OutDir();
  run.EchoConfig(dir);
  DatasetH train, val, test;
  run.LoadData(train, val, test);
  ModelH model;
  LoadModel(run.Get("paths.model"), model);
  ReportH report;
  Check(sr_evaluate(run.cfg(), model.get(), test.get(), report.out()), "evaluate");
  WriteReport(run, dir, report.get(), run.Get("model_id"));
}

void Transfer(Run& run) {
  run.Resolve();
  run.DefaultModelId(Stem(run.Get("paths.target_model")) + "_from_" +
                     Stem(run.Get("paths.source_model")));
  const fs::path dir = run.OutDir();
  run.EchoConfig(dir);
  DatasetH train, val, test;
  run.LoadData(train, val, test);
  ModelH source, target;
  LoadModel(run.Get("paths.source_model"), source);
  LoadModel(run.Get("paths.target_model"), target);
  ReportH report;
  Check(sr_transfer(run.cfg(), source.get(), target.get(), test.get(), report.out()), "transfer");
  WriteReport(run, dir, report.get(), run.Get("model_id"));
}

void Report(Run& run) {
  run.Resolve();
  const fs::path dir = run.OutDir();
  run.EchoConfig(dir);
  // Report paths arrive as a JSON array of strings.
  std::vector<std::string> paths;
  for (std::size_t i = 0;; ++i) {
    char* s = nullptr;
    if (sr_config_get(run.cfg(), ("paths.reports." + std::to_string(i)).c_str(), &s) != SR_OK) break;
    paths.push_back(TakeString(s));
  }
  ReportH merged;
  for (const auto& p : paths) {
    ReportH r;
    Check(sr_report_read(p.c_str(), r.out()), "read " + p);
    if (!merged.get()) {
      std::swap(merged.p, r.p);
    } else {
      Check(sr_report_merge(merged.p, r.get()), "merge");
    }
  }
  const std::string id = run.Get("model_id");
  if (!id.empty()) Check(sr_report_set_model_id(merged.p, id.c_str()), "report");
  const std::string ext = run.Get("format") == "json" ? ".json" : ".csv";
  const fs::path out = OutputFile(run, dir, "report" + ext);
  Check(sr_report_write(merged.get(), out.string().c_str()), "report");
  char* csv = nullptr;
  Check(sr_report_to_csv(merged.get(), &csv), "report");
  std::cout << TakeString(csv);
  std::printf("report: %s\n", out.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sensireg: sensitivity-regularized training and adversarial evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sr_version());

  Options opts;
  struct Command {
    const char* name;
    const char* help;
    void (*fn)(Run&);
  };
  const Command commands[] = {
      {"pretrain", "train a model with cross-entropy", [](Run& r) { Train(r, false); }},
      {"robustify", "continue training a checkpoint with the regularized loss",
       [](Run& r) { Train(r, true); }},
      {"lambda-search", "calibrate a regularizer weight", LambdaSearch},
      {"attack", "attack one test sample", Attack},
      {"evaluate", "adversarial test accuracy over the budget sweep", Evaluate},
      {"transfer", "attack a source model and score a target model", Transfer},
      {"report", "merge report files", Report},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opts.config_path, "JSON config file");
    sub->add_option("--seed", opts.seed, "global seed (default 42)");
    sub->add_option("--out-dir", opts.out_dir, "output directory");
    sub->add_option("--workers", opts.workers, "attack worker threads (0 = all cores)");
    sub->add_option("overrides", opts.overrides, "dotted key=value overrides");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  for (const auto& c : commands) {
    if (!app.got_subcommand(c.name)) continue;
    Run run(c.name, opts);
    try {
      c.fn(run);
    } catch (const Failure& f) {
      std::fprintf(stderr, "sensireg %s: %s\n", c.name, f.message.c_str());
      return f.exit_code;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "sensireg %s: %s\n", c.name, e.what());
      return kExitRuntime;
    }
    return kExitOk;
  }
  return kExitConfig;
}
