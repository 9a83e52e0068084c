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

// Command-line front end. Talks to the library exclusively through the C
// interface in agrifed.h, exactly like any external embedder would.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agrifed.h"

namespace {

// Exit codes: 0 success, 1 io/runtime failure, 2 configuration error.
int exit_code_for(af_status status) {
  return status == AF_ERR_CONFIG || status == AF_ERR_INVALID_ARGUMENT ? 2 : 1;
}

[[noreturn]] void die(af_status status) {
  std::fprintf(stderr, "agrifed: error: %s\n", af_last_error());
  std::exit(exit_code_for(status));
}

void check(af_status status) {
  if (status != AF_OK) die(status);
}

using ConfigHandle = std::unique_ptr<af_config, decltype(&af_config_close)>;

ConfigHandle open_config(const std::string& path,
                         const std::vector<std::string>& overrides) {
  af_config* raw = nullptr;
  if (path.empty())
    check(af_config_default(&raw));
  else
    check(af_config_open(path.c_str(), &raw));
  ConfigHandle cfg(raw, &af_config_close);

  for (const auto& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "agrifed: error: --set expects key=value, got '%s'\n",
                   kv.c_str());
      std::exit(2);
    }
    check(af_config_override(cfg.get(), kv.substr(0, eq).c_str(),
                             kv.substr(eq + 1).c_str()));
  }
  return cfg;
}

// Wraps an af_* call that returns an owned string through `slot`.
template <typename Fn>
std::string fetch_string(Fn&& fn) {
  char* owned = nullptr;
  check(fn(&owned));
  std::string out = owned == nullptr ? "" : owned;
  af_string_free(owned);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agrifed: cross-silo federated learning simulator"};
  app.set_version_flag("--version", std::string(af_version()));
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "experiment file (INI)");
  app.add_option("--set", overrides, "override, e.g. --set federation.rounds=10");

  auto* generate = app.add_subcommand("generate", "write a synthetic dataset as CSV");
  std::uint64_t gen_seed = 1;
  std::string gen_out = "data.csv";
  generate->add_option("--seed", gen_seed, "generator seed");
  generate->add_option("--out", gen_out, "output CSV path")->required();

  auto* run = app.add_subcommand("run", "run the training-regime comparison");
  std::string run_out_dir;
  int run_threads = 0;
  run->add_option("--out-dir", run_out_dir, "report directory")->required();
  run->add_option("--threads", run_threads, "worker threads (0 = config value)");

  auto* sweep = app.add_subcommand("sweep", "privacy-utility curve over budgets");
  std::string sweep_out_dir;
  int sweep_threads = 0;
  sweep->add_option("--out-dir", sweep_out_dir, "report directory")->required();
  sweep->add_option("--threads", sweep_threads, "worker threads (0 = config value)");

  auto* inspect = app.add_subcommand("inspect", "describe a checkpoint or manifest");
  std::string inspect_path;
  inspect->add_option("path", inspect_path, "checkpoint .ckpt or manifest .json")
      ->required();

  auto* dump = app.add_subcommand("config", "print the effective configuration");

  // Accept --config and --set before or after the subcommand name.
  for (CLI::App* sub : {generate, run, sweep, inspect, dump}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  if (inspect->parsed()) {
    const std::string text = fetch_string(
        [&](char** slot) { return af_inspect(inspect_path.c_str(), slot); });
    std::printf("%s\n", text.c_str());
    return 0;
  }

  ConfigHandle cfg = open_config(config_path, overrides);

  if (dump->parsed()) {
    const std::string text = fetch_string(
        [&](char** slot) { return af_config_dump(cfg.get(), slot); });
    const std::string hash = fetch_string(
        [&](char** slot) { return af_config_hash(cfg.get(), slot); });
    std::printf("%s# hash = %s\n", text.c_str(), hash.c_str());
    return 0;
  }

  if (generate->parsed()) {
    af_dataset* data = nullptr;
    check(af_dataset_generate(cfg.get(), gen_seed, &data));
    std::unique_ptr<af_dataset, decltype(&af_dataset_close)> guard(data,
                                                                   &af_dataset_close);
    check(af_dataset_write_csv(data, gen_out.c_str()));
    size_t silos = 0, rows = 0;
    check(af_dataset_silo_count(data, &silos));
    check(af_dataset_row_count(data, &rows));
    std::printf("wrote %s (%zu silos, %zu rows)\n", gen_out.c_str(), silos, rows);
    return 0;
  }

  if (run->parsed()) {
    af_report* report = nullptr;
    check(af_run_matrix(cfg.get(), run_out_dir.c_str(), run_threads, &report));
    std::unique_ptr<af_report, decltype(&af_report_close)> guard(report,
                                                                 &af_report_close);
    size_t cells = 0, failed = 0;
    check(af_report_cell_count(report, &cells));
    check(af_report_failed_count(report, &failed));
    const std::string hash_text = fetch_string(
        [&](char** slot) { return af_report_config_hash(report, slot); });
    std::printf("completed %zu cells (%zu failed), config %s\n", cells, failed,
                hash_text.c_str());
    std::printf("report: %s/report.csv\nsummary: %s/summary.txt\n",
                run_out_dir.c_str(), run_out_dir.c_str());
    return 0;
  }

  if (sweep->parsed()) {
    char* text = nullptr;
    check(af_run_sweep(cfg.get(), sweep_out_dir.c_str(), sweep_threads, &text));
    std::string csv = text == nullptr ? "" : text;
    af_string_free(text);
    std::printf("%s", csv.c_str());
    std::printf("curve: %s/curves/epsilon.csv\n", sweep_out_dir.c_str());
    return 0;
  }

  return 0;
}
