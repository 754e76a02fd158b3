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
/* C interface to the sensireg library. Every call returns an sr_status;
 * on failure sr_last_error_message() describes the error of the calling
 * thread. Strings returned through char** are released with sr_string_free.
 */
#ifndef SENSIREG_SENSIREG_H_
#define SENSIREG_SENSIREG_H_

#include <stddef.h>
#include <stdint.h>

#if defined(SENSIREG_BUILDING_LIBRARY)
#define SR_API __attribute__((visibility("default")))
#else
#define SR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sr_status {
  SR_OK = 0,
  SR_INVALID_ARGUMENT = 1,
  SR_SHAPE_MISMATCH = 2,
  SR_IO = 3,
  SR_CORRUPT_FILE = 4,
  SR_VERSION_MISMATCH = 5,
  SR_INVALID_CONFIG = 6,
  SR_TRAINING_ABORTED = 7,
  SR_NUMERICAL = 8,
  SR_INTERNAL = 99
} sr_status;

typedef struct sr_config sr_config;
typedef struct sr_dataset sr_dataset;
typedef struct sr_model sr_model;
typedef struct sr_report sr_report;

SR_API const char* sr_version(void);
SR_API const char* sr_last_error_message(void);
SR_API const char* sr_status_name(sr_status status);
SR_API void sr_string_free(char* s);

/* config_json may be NULL or empty. overrides are "dotted.key=value". */
SR_API sr_status sr_config_resolve(const char* command, const char* config_json,
                                   const char* const* overrides, size_t n_overrides,
                                   sr_config** out);
SR_API sr_status sr_config_to_json(const sr_config* cfg, char** out);
/* Value at a dotted key of the resolved config, as JSON text (strings unquoted). */
SR_API sr_status sr_config_get(const sr_config* cfg, const char* key, char** out);
SR_API void sr_config_free(sr_config* cfg);

/* Train/val/test splits described by cfg; *val is NULL without a validation split. */
SR_API sr_status sr_data_load(const sr_config* cfg, sr_dataset** train, sr_dataset** val,
                              sr_dataset** test);
SR_API size_t sr_dataset_size(const sr_dataset* ds);
SR_API size_t sr_dataset_num_classes(const sr_dataset* ds);
SR_API size_t sr_dataset_sample_size(const sr_dataset* ds);
SR_API void sr_dataset_free(sr_dataset* ds);

/* Fresh model for the cfg architecture, sized for `like`. */
SR_API sr_status sr_model_create(const sr_config* cfg, const sr_dataset* like, sr_model** out);
SR_API sr_status sr_model_load(const char* path, sr_model** out);
SR_API sr_status sr_model_save(const sr_model* model, const char* path);
SR_API sr_status sr_model_predict(const sr_model* model, const double* x, size_t n, int* label);
SR_API sr_status sr_model_accuracy(const sr_model* model, const sr_dataset* ds, double* out);
SR_API void sr_model_free(sr_model* model);

/* Training replaces *model on success. log_path (may be NULL) receives the
 * per-epoch CSV log. */
SR_API sr_status sr_pretrain(const sr_config* cfg, sr_model** model, const sr_dataset* train,
                             const sr_dataset* val, const char* log_path);
SR_API sr_status sr_robustify(const sr_config* cfg, sr_model** model, const sr_dataset* train,
                              const sr_dataset* val, const char* log_path);
/* Result as a JSON document (r0, lambda0, bracket, probes, recommended). */
SR_API sr_status sr_lambda_search(const sr_config* cfg, const sr_model* model,
                                  const sr_dataset* train, const sr_dataset* val,
                                  char** result_json);

/* Attacks sample cfg.sample_index of ds; result as JSON. */
SR_API sr_status sr_attack_sample(const sr_config* cfg, const sr_model* model,
                                  const sr_dataset* ds, char** result_json);
/* Untargeted or targeted sweep per cfg.attack.targeted. */
SR_API sr_status sr_evaluate(const sr_config* cfg, const sr_model* model, const sr_dataset* ds,
                             sr_report** out);
SR_API sr_status sr_transfer(const sr_config* cfg, const sr_model* source,
                             const sr_model* target, const sr_dataset* ds, sr_report** out);

SR_API sr_status sr_report_read(const char* path, sr_report** out);
/* Format from the extension (.csv or .json). */
SR_API sr_status sr_report_write(const sr_report* report, const char* path);
/* Appends the rows of src to dst and re-sorts. */
SR_API sr_status sr_report_merge(sr_report* dst, const sr_report* src);
SR_API sr_status sr_report_set_model_id(sr_report* report, const char* model_id);
SR_API sr_status sr_report_to_csv(const sr_report* report, char** out);
SR_API size_t sr_report_num_rows(const sr_report* report);
SR_API void sr_report_free(sr_report* report);

#ifdef __cplusplus
}
#endif

#endif /* SENSIREG_SENSIREG_H_ */
