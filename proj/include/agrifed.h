/* Copyright 2026 The Agrifed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the agrifed federated-learning simulator.
 *
 * Every function returns an af_status code; AF_OK is 0. On failure,
 * af_last_error() returns a message for the calling thread. Objects are
 * opaque handles released with their _close function; strings returned
 * through char** are released with af_string_free.
 */

#ifndef AGRIFED_H_
#define AGRIFED_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum af_status {
  AF_OK = 0,
  AF_ERR_INVALID_ARGUMENT = 1,
  AF_ERR_CONFIG = 2,
  AF_ERR_IO = 3,
  AF_ERR_RUNTIME = 4
} af_status;

typedef struct af_config af_config;
typedef struct af_dataset af_dataset;
typedef struct af_report af_report;

/* Library semantic version, static storage. */
const char* af_version(void);

/* Message from the last failing call on this thread; empty string if none. */
const char* af_last_error(void);

void af_string_free(char* s);

/* ---- configuration ---- */

/* Built-in defaults (synthetic data, all six regimes). */
af_status af_config_default(af_config** out);

/* Parse and validate an INI-style experiment file. */
af_status af_config_open(const char* path, af_config** out);

/* Apply one "section.key" = value override. The key and value are checked
 * immediately; cross-field constraints are checked when the configuration is
 * used, so override order never matters. */
af_status af_config_override(af_config* cfg, const char* dotted_key,
                             const char* value);

/* Canonical text rendering of every effective value. */
af_status af_config_dump(const af_config* cfg, char** out);

/* 16-hex-digit digest of the canonical dump. */
af_status af_config_hash(const af_config* cfg, char** out);

void af_config_close(af_config* cfg);

/* ---- datasets ---- */

/* Synthetic federation from the config's generator settings; deterministic
 * in (config, seed). */
af_status af_dataset_generate(const af_config* cfg, uint64_t seed,
                              af_dataset** out);

/* Load a CSV using the config's column schema. */
af_status af_dataset_open_csv(const af_config* cfg, const char* path,
                              af_dataset** out);

/* Write a dataset as CSV with the synthetic column names. */
af_status af_dataset_write_csv(const af_dataset* data, const char* path);

af_status af_dataset_silo_count(const af_dataset* data, size_t* out);
af_status af_dataset_row_count(const af_dataset* data, size_t* out);

void af_dataset_close(af_dataset* data);

/* ---- experiments ---- */

/* Run the full regimes x years x seeds matrix. When out_dir is non-NULL the
 * report files (report.csv, summary.txt, history/, checkpoints/) are written
 * there. When out_report is non-NULL it receives a report handle. threads
 * <= 0 uses the config's thread count. */
af_status af_run_matrix(const af_config* cfg, const char* out_dir, int threads,
                        af_report** out_report);

/* Privacy-utility sweep over the configured budgets. Writes
 * curves/epsilon.csv under out_dir when non-NULL; returns the CSV text via
 * csv_out when non-NULL. */
af_status af_run_sweep(const af_config* cfg, const char* out_dir, int threads,
                       char** csv_out);

af_status af_report_cell_count(const af_report* report, size_t* out);
af_status af_report_failed_count(const af_report* report, size_t* out);

/* Mean RMSE over the non-failed cells of one regime name; NaN when none. */
af_status af_report_regime_mean(const af_report* report, const char* regime,
                                double* out);

af_status af_report_config_hash(const af_report* report, char** out);

void af_report_close(af_report* report);

/* ---- artifacts ---- */

/* Human summary of a checkpoint file or an ensemble manifest.json. */
af_status af_inspect(const char* path, char** out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* AGRIFED_H_ */
