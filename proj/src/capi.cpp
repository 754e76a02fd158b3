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
#include "sensireg/sensireg.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <thread>

#include "json.hpp"
#include "sensireg/config.hpp"
#include "sensireg/error.hpp"
#include "sensireg/eval.hpp"
#include "sensireg/rng.hpp"

struct sr_config {
  sensireg::RunConfig cfg;
  nlohmann::json resolved;
};
struct sr_dataset {
  sensireg::Dataset ds;
};
struct sr_model {
  sensireg::Model model;
};
struct sr_report {
  sensireg::EvalReport report;
};

namespace {

using namespace sensireg;

thread_local std::string g_last_error;

sr_status SetError(sr_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

template <typename Fn>
sr_status Guard(Fn fn) {
  try {
    fn();
    g_last_error.clear();
    return SR_OK;
  } catch (const Error& e) {
    return SetError(static_cast<sr_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return SetError(SR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return SetError(SR_INTERNAL, e.what());
  }
}

void NotNull(const void* p, const char* name) {
  if (!(p != nullptr))
    Fail(ErrorCode::kInvalidArgument, std::string(name) + " is null");
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::size_t Workers(const RunConfig& cfg) {
  if (cfg.workers) return cfg.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Empty unless SOURCE_DATE_EPOCH pins it, so reruns stay byte-identical.
std::string Timestamp() {
  const char* sde = std::getenv("SOURCE_DATE_EPOCH");
  return sde ? std::string(sde) : std::string();
}

EvalOptions Options(const RunConfig& cfg) {
  EvalOptions o;
  o.seed = cfg.seed;
  o.workers = Workers(cfg);
  return o;
}

void Stamp(EvalReport& r, const RunConfig& cfg) {
  r.metadata.model_id = cfg.model_id;
  r.metadata.seed = cfg.seed;
  r.metadata.timestamp = Timestamp();
}

template <typename TrainFn>
sr_status RunTraining(const sr_config* cfg, sr_model** model, const sr_dataset* train,
                      const sr_dataset* val, const char* log_path, TrainFn train_fn) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(model, "model");
    NotNull(*model, "*model");
    NotNull(train, "train");
    std::ofstream log;
    if (log_path) {
      log.open(log_path, std::ios::binary | std::ios::trunc);
      if (!log) Fail(ErrorCode::kIo, std::string("cannot open ") + log_path);
    }
    TrainResult res = train_fn((*model)->model, train->ds, val ? &val->ds : nullptr,
                               cfg->cfg.train, log_path ? &log : nullptr);
    (*model)->model = std::move(res.model);
  });
}

}  // namespace

extern "C" {

const char* sr_version(void) { return "1.0.0"; }

const char* sr_last_error_message(void) { return g_last_error.c_str(); }

const char* sr_status_name(sr_status status) {
  switch (status) {
    case SR_OK: return "ok";
    case SR_INVALID_ARGUMENT: return "invalid argument";
    case SR_SHAPE_MISMATCH: return "shape mismatch";
    case SR_IO: return "i/o error";
    case SR_CORRUPT_FILE: return "corrupt file";
    case SR_VERSION_MISMATCH: return "version mismatch";
    case SR_INVALID_CONFIG: return "invalid config";
    case SR_TRAINING_ABORTED: return "training aborted";
    case SR_NUMERICAL: return "numerical error";
    case SR_INTERNAL: return "internal error";
  }
  return "unknown";
}

void sr_string_free(char* s) { std::free(s); }

sr_status sr_config_resolve(const char* command, const char* config_json,
                            const char* const* overrides, size_t n_overrides,
                            sr_config** out) {
  return Guard([&] {
    NotNull(command, "command");
    NotNull(out, "out");
    std::vector<std::string> ov;
    for (size_t i = 0; i < n_overrides; ++i) {
      NotNull(overrides[i], "override");
      ov.emplace_back(overrides[i]);
    }
    auto c = std::make_unique<sr_config>();
    c->cfg = ResolveConfig(command, config_json ? config_json : "", ov);
    c->resolved = nlohmann::json::parse(RunConfigToJson(c->cfg));
    *out = c.release();
  });
}

sr_status sr_config_to_json(const sr_config* cfg, char** out) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(out, "out");
    *out = CopyString(RunConfigToJson(cfg->cfg));
  });
}

sr_status sr_config_get(const sr_config* cfg, const char* key, char** out) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(key, "key");
    NotNull(out, "out");
    std::string path = "/";
    for (const char* p = key; *p; ++p) path += *p == '.' ? '/' : *p;
    const nlohmann::json::json_pointer ptr(path);
    if (!cfg->resolved.contains(ptr)) Fail(ErrorCode::kInvalidArgument, std::string("no config key ") + key);
    const auto& v = cfg->resolved.at(ptr);
    *out = CopyString(v.is_string() ? v.get<std::string>() : v.dump());
  });
}

void sr_config_free(sr_config* cfg) { delete cfg; }

sr_status sr_data_load(const sr_config* cfg, sr_dataset** train, sr_dataset** val,
                       sr_dataset** test) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(train, "train");
    NotNull(test, "test");
    DataSplits s = LoadData(cfg->cfg);
    auto tr = std::make_unique<sr_dataset>(sr_dataset{std::move(s.train)});
    auto te = std::make_unique<sr_dataset>(sr_dataset{std::move(s.test)});
    std::unique_ptr<sr_dataset> va;
    if (s.val) va = std::make_unique<sr_dataset>(sr_dataset{std::move(*s.val)});
    *train = tr.release();
    *test = te.release();
    if (val) *val = va.release();
  });
}

size_t sr_dataset_size(const sr_dataset* ds) { return ds ? ds->ds.size() : 0; }
size_t sr_dataset_num_classes(const sr_dataset* ds) { return ds ? ds->ds.num_classes : 0; }
size_t sr_dataset_sample_size(const sr_dataset* ds) { return ds ? ds->ds.sample_size() : 0; }
void sr_dataset_free(sr_dataset* ds) { delete ds; }

sr_status sr_model_create(const sr_config* cfg, const sr_dataset* like, sr_model** out) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(like, "like");
    NotNull(out, "out");
    const Architecture arch =
        BuildArchitecture(cfg->cfg.model, like->ds.sample_shape(), like->ds.num_classes);
    Rng rng(DeriveSeed(cfg->cfg.seed, {0x6d6f64656cULL}));
    *out = new sr_model{Model::Init(arch, rng)};
  });
}

sr_status sr_model_load(const char* path, sr_model** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new sr_model{LoadModel(path)};
  });
}

sr_status sr_model_save(const sr_model* model, const char* path) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(path, "path");
    SaveModel(model->model, path);
  });
}

sr_status sr_model_predict(const sr_model* model, const double* x, size_t n, int* label) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(x, "x");
    NotNull(label, "label");
    if (!(n == model->model.input_size()))
      Fail(ErrorCode::kShapeMismatch,
           "input has " + std::to_string(n) + " values, model expects " +
               std::to_string(model->model.input_size()));
    *label = model->model.Predict(std::span<const double>(x, n));
  });
}

sr_status sr_model_accuracy(const sr_model* model, const sr_dataset* ds, double* out) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(ds, "ds");
    NotNull(out, "out");
    *out = Accuracy(model->model, ds->ds.inputs, ds->ds.labels);
  });
}

void sr_model_free(sr_model* model) { delete model; }

sr_status sr_pretrain(const sr_config* cfg, sr_model** model, const sr_dataset* train,
                      const sr_dataset* val, const char* log_path) {
  return RunTraining(cfg, model, train, val, log_path,
                     [](const Model& m, const Dataset& tr, const Dataset* va,
                        const TrainConfig& tc, std::ostream* log) { return Pretrain(m, tr, va, tc, log); });
}

sr_status sr_robustify(const sr_config* cfg, sr_model** model, const sr_dataset* train,
                       const sr_dataset* val, const char* log_path) {
  return RunTraining(cfg, model, train, val, log_path,
                     [](const Model& m, const Dataset& tr, const Dataset* va,
                        const TrainConfig& tc, std::ostream* log) { return Robustify(m, tr, va, tc, log); });
}

sr_status sr_lambda_search(const sr_config* cfg, const sr_model* model, const sr_dataset* train,
                           const sr_dataset* val, char** result_json) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(model, "model");
    NotNull(train, "train");
    NotNull(result_json, "result_json");
    const RunConfig& c = cfg->cfg;
    const LambdaSearchResult r = LambdaSearch(model->model, train->ds, val ? &val->ds : nullptr,
                                              RegularizerIdFromName(c.regularizer), c.train);
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& p : r.probes)
      probes.push_back({{"lambda", p.lambda},
                        {"epoch_ce", std::isfinite(p.epoch_ce) ? nlohmann::json(p.epoch_ce)
                                                               : nlohmann::json(nullptr)},
                        {"too_high", p.too_high}});
    const nlohmann::json doc = {{"regularizer", c.regularizer}, {"r0", r.r0},
                                {"lambda0", r.lambda0},         {"lower", r.lower},
                                {"upper", r.upper},             {"recommended", r.recommended},
                                {"probes", probes}};
    *result_json = CopyString(doc.dump(2) + "\n");
  });
}

sr_status sr_attack_sample(const sr_config* cfg, const sr_model* model, const sr_dataset* ds,
                           char** result_json) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(model, "model");
    NotNull(ds, "ds");
    NotNull(result_json, "result_json");
    const RunConfig& c = cfg->cfg;
    if (!(c.sample_index < ds->ds.size()))
      Fail(ErrorCode::kInvalidConfig,
           "sample_index " + std::to_string(c.sample_index) + " out of range");
    const auto x = ds->ds.SampleView(c.sample_index);
    AttackGoal goal{ds->ds.labels[c.sample_index], std::nullopt};
    if (c.attack.targeted) {
      const int nc = static_cast<int>(ds->ds.num_classes);
      goal.target = c.attack.target_class ? *c.attack.target_class : (goal.label + 1) % nc;
      Require(*goal.target < nc, "attack.target_class out of range", ErrorCode::kInvalidConfig);
      Require(*goal.target != goal.label, "attack.target_class equals the true label",
              ErrorCode::kInvalidConfig);
    }
    const AttackOutcome o = RunAttack(model->model, x, goal, c.attack, c.attack.pgd.eps,
                                      DeriveSeed(c.seed, {c.sample_index}));
    nlohmann::json doc = {{"attack", c.attack.DisplayName()},
                          {"sample_index", c.sample_index},
                          {"label", goal.label},
                          {"target", goal.target ? nlohmann::json(*goal.target) : nlohmann::json(nullptr)},
                          {"clean_prediction", model->model.Predict(x)},
                          {"adversarial_prediction", model->model.Predict(o.adversarial)},
                          {"success", o.success},
                          {"l2_distance", o.l2_distance},
                          {"queries", o.queries},
                          {"iterations", o.iterations_used},
                          {"adversarial", o.adversarial}};
    *result_json = CopyString(doc.dump(2) + "\n");
  });
}

sr_status sr_evaluate(const sr_config* cfg, const sr_model* model, const sr_dataset* ds,
                      sr_report** out) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(model, "model");
    NotNull(ds, "ds");
    NotNull(out, "out");
    const RunConfig& c = cfg->cfg;
    EvalReport r =
        c.attack.targeted
            ? TargetedSweep(model->model, c.attack, ds->ds, c.sweep, Options(c),
                            std::min(c.n_samples, kTargetedSamples))
            : AdversarialTestAccuracySweep(model->model, c.attack, ds->ds, c.sweep, c.n_samples,
                                           Options(c));
    Stamp(r, c);
    *out = new sr_report{std::move(r)};
  });
}

sr_status sr_transfer(const sr_config* cfg, const sr_model* source, const sr_model* target,
                      const sr_dataset* ds, sr_report** out) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(source, "source");
    NotNull(target, "target");
    NotNull(ds, "ds");
    NotNull(out, "out");
    const RunConfig& c = cfg->cfg;
    const std::size_t n = c.attack.targeted ? std::min(c.n_samples, kTargetedSamples) : c.n_samples;
    EvalReport r = TransferabilityEval(source->model, target->model, c.attack, ds->ds, c.sweep,
                                       n, Options(c));
    Stamp(r, c);
    *out = new sr_report{std::move(r)};
  });
}

sr_status sr_report_read(const char* path, sr_report** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new sr_report{ReadReport(path)};
  });
}

sr_status sr_report_write(const sr_report* report, const char* path) {
  return Guard([&] {
    NotNull(report, "report");
    NotNull(path, "path");
    EmitReport(report->report, path, ReportFormatFromPath(path));
  });
}

sr_status sr_report_merge(sr_report* dst, const sr_report* src) {
  return Guard([&] {
    NotNull(dst, "dst");
    NotNull(src, "src");
    auto& rows = dst->report.rows;
    rows.insert(rows.end(), src->report.rows.begin(), src->report.rows.end());
    dst->report.SortRows();
  });
}

sr_status sr_report_set_model_id(sr_report* report, const char* model_id) {
  return Guard([&] {
    NotNull(report, "report");
    NotNull(model_id, "model_id");
    report->report.metadata.model_id = model_id;
  });
}

sr_status sr_report_to_csv(const sr_report* report, char** out) {
  return Guard([&] {
    NotNull(report, "report");
    NotNull(out, "out");
    *out = CopyString(ReportToCsv(report->report));
  });
}

size_t sr_report_num_rows(const sr_report* report) {
  return report ? report->report.rows.size() : 0;
}

void sr_report_free(sr_report* report) { delete report; }

}  // extern "C"
