// Copyright 2026 The Agrifed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "agrifed.h"

#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "agrifed/checkpoint.hpp"
#include "agrifed/config.hpp"
#include "agrifed/data.hpp"
#include "agrifed/ensemble.hpp"
#include "agrifed/errors.hpp"
#include "agrifed/harness.hpp"

struct af_config {
  agrifed::config::ParsedConfig cfg;
};

struct af_dataset {
  std::vector<agrifed::data::SiloDataset> silos;
};

struct af_report {
  agrifed::harness::MatrixReport report;
};

namespace {

thread_local std::string g_last_error;

af_status fail(af_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Runs the body and maps exceptions onto status codes at the ABI boundary.
template <typename Fn>
af_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return AF_OK;
  } catch (const agrifed::ConfigError& e) {
    return fail(AF_ERR_CONFIG, e.what());
  } catch (const agrifed::IoError& e) {
    return fail(AF_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(AF_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(AF_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(AF_ERR_RUNTIME, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::runtime_error("out of memory");
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Cross-field validation runs when the config is used, not per override, so
// override order never matters (e.g. data.source=csv before data.csv_path).
agrifed::config::ParsedConfig finalized(const af_config* cfg) {
  agrifed::config::ParsedConfig out = cfg->cfg;
  agrifed::config::finalize(out);
  return out;
}

}  // namespace

extern "C" {

const char* af_version(void) { return "0.1.0"; }

const char* af_last_error(void) { return g_last_error.c_str(); }

void af_string_free(char* s) { std::free(s); }

af_status af_config_default(af_config** out) {
  if (out == nullptr) return fail(AF_ERR_INVALID_ARGUMENT, "out is NULL");
  return guarded([&]() {
    auto handle = new af_config{agrifed::config::default_config()};
    *out = handle;
  });
}

af_status af_config_open(const char* path, af_config** out) {
  if (path == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "path or out is NULL");
  return guarded([&]() {
    auto handle = new af_config{agrifed::config::parse_config_file(path)};
    *out = handle;
  });
}

af_status af_config_override(af_config* cfg, const char* dotted_key,
                             const char* value) {
  if (cfg == nullptr || dotted_key == nullptr || value == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "cfg, key, or value is NULL");
  return guarded([&]() {
    // Apply on a copy so a bad override cannot leave the handle half-edited.
    agrifed::config::ParsedConfig updated = cfg->cfg;
    agrifed::config::apply_override(updated, dotted_key, value);
    cfg->cfg = std::move(updated);
  });
}

af_status af_config_dump(const af_config* cfg, char** out) {
  if (cfg == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "cfg or out is NULL");
  return guarded([&]() { *out = dup_string(agrifed::config::canonical_dump(finalized(cfg))); });
}

af_status af_config_hash(const af_config* cfg, char** out) {
  if (cfg == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "cfg or out is NULL");
  return guarded(
      [&]() { *out = dup_string(agrifed::config::config_hash_hex(finalized(cfg))); });
}

void af_config_close(af_config* cfg) { delete cfg; }

af_status af_dataset_generate(const af_config* cfg, uint64_t seed,
                              af_dataset** out) {
  if (cfg == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "cfg or out is NULL");
  return guarded([&]() {
    auto handle =
        new af_dataset{agrifed::data::generate_silos(finalized(cfg).generator, seed)};
    *out = handle;
  });
}

af_status af_dataset_open_csv(const af_config* cfg, const char* path,
                              af_dataset** out) {
  if (cfg == nullptr || path == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "cfg, path, or out is NULL");
  return guarded([&]() {
    auto handle =
        new af_dataset{agrifed::data::load_csv(path, finalized(cfg).csv_schema, nullptr)};
    *out = handle;
  });
}

af_status af_dataset_write_csv(const af_dataset* data, const char* path) {
  if (data == nullptr || path == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "data or path is NULL");
  return guarded([&]() {
    if (data->silos.empty()) throw std::invalid_argument("dataset is empty");
    const int d = static_cast<int>(data->silos.front().feature_dim());
    agrifed::data::write_csv(path, data->silos, agrifed::data::synthetic_schema(d));
  });
}

af_status af_dataset_silo_count(const af_dataset* data, size_t* out) {
  if (data == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "data or out is NULL");
  *out = data->silos.size();
  return AF_OK;
}

af_status af_dataset_row_count(const af_dataset* data, size_t* out) {
  if (data == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "data or out is NULL");
  size_t rows = 0;
  for (const auto& s : data->silos) rows += static_cast<size_t>(s.size());
  *out = rows;
  return AF_OK;
}

void af_dataset_close(af_dataset* data) { delete data; }

af_status af_run_matrix(const af_config* cfg, const char* out_dir, int threads,
                        af_report** out_report) {
  if (cfg == nullptr) return fail(AF_ERR_INVALID_ARGUMENT, "cfg is NULL");
  return guarded([&]() {
    const agrifed::config::ParsedConfig ready = finalized(cfg);
    agrifed::harness::MatrixReport report =
        agrifed::harness::run_matrix(ready, threads);
    if (out_dir != nullptr && out_dir[0] != '\0')
      agrifed::harness::write_outputs(report, ready, out_dir);
    if (out_report != nullptr) *out_report = new af_report{std::move(report)};
  });
}

af_status af_run_sweep(const af_config* cfg, const char* out_dir, int threads,
                       char** csv_out) {
  if (cfg == nullptr) return fail(AF_ERR_INVALID_ARGUMENT, "cfg is NULL");
  return guarded([&]() {
    const std::vector<agrifed::harness::SweepPoint> curve =
        agrifed::harness::sweep_epsilon(finalized(cfg), threads);
    if (out_dir != nullptr && out_dir[0] != '\0')
      agrifed::harness::write_sweep_csv(curve, out_dir);
    if (csv_out != nullptr) {
      std::string text = "epsilon_budget,median_rmse,mean_rmse\n";
      char buf[128];
      for (const auto& point : curve) {
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g\n", point.budget,
                      point.median_rmse, point.mean_rmse);
        text += buf;
      }
      *csv_out = dup_string(text);
    }
  });
}

af_status af_report_cell_count(const af_report* report, size_t* out) {
  if (report == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "report or out is NULL");
  *out = report->report.cells.size();
  return AF_OK;
}

af_status af_report_failed_count(const af_report* report, size_t* out) {
  if (report == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "report or out is NULL");
  size_t failed = 0;
  for (const auto& cell : report->report.cells)
    if (cell.second.failed) ++failed;
  *out = failed;
  return AF_OK;
}

af_status af_report_regime_mean(const af_report* report, const char* regime,
                                double* out) {
  if (report == nullptr || regime == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "report, regime, or out is NULL");
  return guarded([&]() {
    *out = report->report.regime_mean(agrifed::harness::regime_from_string(regime));
  });
}

af_status af_report_config_hash(const af_report* report, char** out) {
  if (report == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "report or out is NULL");
  return guarded([&]() { *out = dup_string(report->report.config_hash); });
}

void af_report_close(af_report* report) { delete report; }

af_status af_inspect(const char* path, char** out) {
  if (path == nullptr || out == nullptr)
    return fail(AF_ERR_INVALID_ARGUMENT, "path or out is NULL");
  return guarded([&]() {
    const std::string p(path);
    if (ends_with(p, ".json"))
      *out = dup_string(agrifed::ensemble::describe_manifest(p));
    else
      *out = dup_string(agrifed::describe_checkpoint(p));
  });
}

}  // extern "C"
