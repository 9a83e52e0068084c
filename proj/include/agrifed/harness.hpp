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

#ifndef AGRIFED_HARNESS_HPP_
#define AGRIFED_HARNESS_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "agrifed/config.hpp"
#include "agrifed/data.hpp"
#include "agrifed/ensemble.hpp"
#include "agrifed/federation.hpp"

namespace agrifed::harness {

enum class Regime {
  traditional_pooled,
  local_only,
  model_sharing,
  model_sharing_ldp,
  federated,
  federated_ldp,
};

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

struct CellKey {
  Regime regime;
  int year = 0;
  std::uint64_t seed = 0;
};

struct CellResult {
  std::map<std::string, double> per_silo_rmse;
  double mean_rmse = 0.0;
  std::map<std::string, double> epsilon_final;  // empty for non-LDP regimes
  bool failed = false;
  std::string error;
  std::vector<std::string> warnings;
  std::vector<fed::RoundRecord> history;  // federated regimes only

  // Populated only when checkpoint writing is enabled.
  std::shared_ptr<ParameterSet> final_global;
  std::shared_ptr<std::vector<ensemble::ModelBundle>> bundles;
};

struct MatrixReport {
  std::string config_hash;
  std::vector<std::pair<CellKey, CellResult>> cells;  // deterministic order
  std::vector<std::string> warnings;
  double wall_clock_seconds = 0.0;

  // Mean over the non-failed cells of one regime (NaN when none).
  double regime_mean(Regime regime) const;
};

// One (regime, year, seed) cell on one dataset replicate. Never throws for
// per-regime training failures; those come back as failed = true.
CellResult run_cell(const config::ParsedConfig& cfg, Regime regime, int year,
                    std::uint64_t seed, const std::vector<data::SiloDataset>& silos);

// The full regimes x years x seeds cross-product over a worker pool.
// `threads` <= 0 falls back to cfg.threads. Results are identical for any
// thread count. Synthetic datasets are regenerated per seed; CSV data is
// loaded once.
MatrixReport run_matrix(const config::ParsedConfig& cfg, int threads = 0);

struct SweepPoint {
  double budget = 0.0;
  double median_rmse = 0.0;
  double mean_rmse = 0.0;
};

// Privacy-utility curve: one federated_ldp run per (budget, seed) on the
// first configured test year; per-budget median and mean of the per-seed
// mean RMSE.
std::vector<SweepPoint> sweep_epsilon(const config::ParsedConfig& cfg,
                                      int threads = 0);

// Serialize a report into out_dir: report.csv (cells), summary.txt (human
// summary; the only place wall-clock appears), history/*.csv per federated
// cell, and checkpoints/ when enabled.
void write_outputs(const MatrixReport& report, const config::ParsedConfig& cfg,
                   const std::string& out_dir);

void write_sweep_csv(const std::vector<SweepPoint>& curve,
                     const std::string& out_dir);

// Spearman rank correlation; NaN when either side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace agrifed::harness

#endif  // AGRIFED_HARNESS_HPP_
