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

#ifndef AGRIFED_FEDERATION_HPP_
#define AGRIFED_FEDERATION_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "agrifed/data.hpp"
#include "agrifed/model.hpp"
#include "agrifed/privacy.hpp"
#include "agrifed/tensor.hpp"

namespace agrifed::fed {

// Learning-rate schedule: base rate multiplied by `factor` at each decay
// point. Points are cumulative local epoch indices (round * E + e), so a
// 4-epoch round setup decaying "at 60 and 120 epochs" decays during rounds
// 15 and 30.
struct LrSchedule {
  double base = 0.01;
  std::vector<long long> decay_points;  // strictly increasing
  double factor = 0.1;

  double at(long long cumulative_epoch) const;
  void validate() const;
};

struct EarlyStopping {
  bool enabled = true;
  int patience = 10;  // rounds (or epochs, for local training)
};

enum class Aggregation { fedavg, fedbn };

struct FedConfig {
  long long rounds = 40;       // T
  double fraction = 1.0;       // C in (0, 1]
  long long local_epochs = 4;  // E
  long long batch_size = 32;   // B
  LrSchedule lr;
  Aggregation aggregation = Aggregation::fedavg;
  EarlyStopping early_stopping;
  std::uint64_t seed = 1;

  void validate() const;
};

struct RoundRecord {
  long long round = 0;
  std::vector<std::string> selected;
  std::map<std::string, double> train_loss;
  double val_loss = 0.0;
  std::map<std::string, double> epsilon_spent;  // 0 when DP disabled
};

// Uniform sample without replacement of m = max(ceil(C*K), 1) silo ids,
// deterministic in (seed, round). C = 1 returns all ids in canonical order.
std::vector<std::string> select_silos(const std::vector<std::string>& all,
                                      double fraction, long long round,
                                      std::uint64_t seed);

struct SiloUpdateResult {
  ParameterSet local;
  double train_loss = 0.0;     // final-epoch mean loss
  long long dp_steps = 0;      // noisy steps taken during this update
  bool budget_stopped = false; // ran out of epsilon mid-update
};

// One SiloUpdate: copy the global, run E epochs of minibatch SGD on the
// silo's train split (deterministic shuffles, last partial batch kept).
// With `dp` present each step uses clipped per-example gradients plus
// Gaussian noise, the accountant advances per step, and training stops once
// the budget is spent. `accountant` is required iff dp is present.
SiloUpdateResult silo_update(const ParameterSet& global, const nn::ModelSpec& spec,
                             const data::SiloDataset& train, const FedConfig& cfg,
                             const dp::PrivacySpec* dp_spec,
                             dp::AccountantState* accountant, long long round);

// Size-weighted parameter mean. fedavg averages everything; fedbn averages
// only non-BN entries and leaves the returned BN entries as the weighted
// mean (the fallback for silos without local BN state). Empty input returns
// previous_global unchanged.
ParameterSet aggregate(
    const std::vector<std::pair<ParameterSet, long long>>& locals,
    Aggregation mode, const ParameterSet& previous_global);

struct FederationResult {
  ParameterSet global;
  std::map<std::string, std::vector<NamedTensor>> per_silo_bn;
  std::vector<RoundRecord> history;
  long long rounds_run = 0;
  bool stopped_early = false;
  bool budget_exhausted_all = false;
};

// The full training loop: T rounds of select -> silo updates -> aggregate,
// validating on the pooled val splits each round. Early stopping restores
// the best-val state. Silos whose privacy budget is spent stop participating;
// the run ends cleanly when none remain.
FederationResult run_federation(const std::vector<data::SiloDataset>& train_silos,
                                const std::vector<data::SiloDataset>& val_silos,
                                const nn::ModelSpec& spec, const FedConfig& cfg,
                                const dp::PrivacySpec* dp_spec);

struct EvalResult {
  double rmse = 0.0;
  bool used_fallback_bn = false;
};

// Eval-mode RMSE on one silo's test split. Under fedbn the silo's own BN
// entries are spliced in first; silos without stored BN state fall back to
// the global's averaged BN entries and are flagged.
EvalResult evaluate(const nn::ModelSpec& spec, const ParameterSet& global,
                    const std::map<std::string, std::vector<NamedTensor>>& per_silo_bn,
                    const data::SiloDataset& test, Aggregation mode);

}  // namespace agrifed::fed

#endif  // AGRIFED_FEDERATION_HPP_
