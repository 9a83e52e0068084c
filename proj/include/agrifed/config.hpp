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

#ifndef AGRIFED_CONFIG_HPP_
#define AGRIFED_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "agrifed/data.hpp"
#include "agrifed/ensemble.hpp"
#include "agrifed/federation.hpp"
#include "agrifed/privacy.hpp"

namespace agrifed::config {

// Everything an experiment needs, filled from an INI-style file ([section]
// headers, key = value lines, # comments). Unknown keys are errors that name
// the offending section.key.
struct ParsedConfig {
  // [experiment]
  std::string name = "experiment";
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<int> test_years = {2017};
  std::vector<std::string> regimes = {"traditional_pooled", "local_only",
                                      "model_sharing",      "model_sharing_ldp",
                                      "federated",          "federated_ldp"};
  int threads = 1;
  data::NormalizationMode normalization = data::NormalizationMode::per_silo;

  // [data]
  enum class Source { synthetic, csv };
  Source source = Source::synthetic;
  std::string csv_path;
  data::CsvSchema csv_schema;

  // [synthetic]; scale/offset take one value (broadcast) or feature_dim values
  data::GeneratorConfig generator;
  std::vector<double> scale_raw = {1.6};
  std::vector<double> offset_raw = {0.5};

  // [model]
  std::vector<int> hidden = {64, 64};
  bool use_bn = true;

  // [federation]
  fed::FedConfig federation;

  // [local]
  ensemble::TrainConfig local;

  // [privacy]
  dp::PrivacySpec privacy;

  // [ensemble]
  ensemble::RankWeighting weighting;

  // [sweep]
  std::vector<double> sweep_budgets = {1, 2, 4, 8, 16};

  // [output]
  bool write_history = true;
  bool write_checkpoints = false;
};

ParsedConfig default_config();

// Parse + validate; throws ConfigError naming section.key on any problem.
ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config_file(const std::string& path);

// Apply one "section.key=value" style override, then re-finalize with
// finalize() before use.
void apply_override(ParsedConfig& cfg, const std::string& dotted_key,
                    const std::string& value);

// Expand broadcast values and run every sub-validator. Idempotent.
void finalize(ParsedConfig& cfg);

// Deterministic text rendering of every effective value, used for the report
// hash. Same semantics in, same bytes out.
std::string canonical_dump(const ParsedConfig& cfg);
std::string config_hash_hex(const ParsedConfig& cfg);

}  // namespace agrifed::config

#endif  // AGRIFED_CONFIG_HPP_
