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

#ifndef AGRIFED_ENSEMBLE_HPP_
#define AGRIFED_ENSEMBLE_HPP_

#include <map>
#include <string>
#include <vector>

#include "agrifed/data.hpp"
#include "agrifed/federation.hpp"
#include "agrifed/model.hpp"
#include "agrifed/privacy.hpp"

namespace agrifed::ensemble {

// One silo's trained model plus everything needed to query it from anywhere:
// where it was trained and which normalization its inputs expect. Models
// travel, data stays.
struct ModelBundle {
  std::string silo_id;
  ParameterSet params;
  data::GeoPoint train_location;
  data::FeatureStats norm_stats;
};

struct TrainConfig {
  long long epochs = 160;
  long long batch_size = 32;
  fed::LrSchedule lr;
  fed::EarlyStopping early_stopping;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class WeightingMode { uniform, distance_rank };

// How a proximity rank becomes a weight. The closest silo has rank 1 and must
// get the largest weight, so ranks are inverted (1/rank) or reversed linearly
// (K - rank + 1); weights are normalized to sum 1 at use.
enum class RankToWeight { inverse_rank, linear_reversed };

struct RankWeighting {
  WeightingMode mode = WeightingMode::distance_rank;
  RankToWeight rank_to_weight = RankToWeight::inverse_rank;
};

// Independent local training: the silo_update loop run for `epochs` single-
// epoch rounds, with early stopping on the silo's own val split. `train` and
// `val` carry already-normalized features; `stats` records which
// normalization that was. The DP path matches federated training; when
// `epsilon_spent` is given it receives the budget actually used.
ModelBundle train_local(const data::SiloDataset& train, const data::SiloDataset& val,
                        const nn::ModelSpec& spec, const TrainConfig& cfg,
                        const dp::PrivacySpec* dp_spec,
                        const data::FeatureStats& stats,
                        double* epsilon_spent = nullptr);

// Proximity ranking: great-circle distance from query to each bundle's
// training location, ascending; rank 1 is nearest. Distance ties break by
// silo id.
std::map<std::string, int> rank_distances(const data::GeoPoint& query,
                                          const std::vector<ModelBundle>& bundles);

// Ensemble prediction for one raw (unnormalized) feature row. Each bundle
// normalizes the row with its own training statistics before its forward
// pass; member predictions are combined by the chosen weighting.
double predict_ensemble(const Eigen::RowVectorXd& raw_features,
                        const data::GeoPoint& query,
                        const std::vector<ModelBundle>& bundles,
                        const nn::ModelSpec& spec, const RankWeighting& weighting);

// Per-silo test RMSE with each test silo's location as the query point.
// `raw_test_silos` must carry unnormalized features.
std::map<std::string, double> evaluate_ensemble(
    const std::vector<ModelBundle>& bundles, const nn::ModelSpec& spec,
    const std::vector<data::SiloDataset>& raw_test_silos,
    const RankWeighting& weighting);

// Persist an ensemble: one checkpoint per bundle plus manifest.json with
// locations, normalization statistics, and the experiment's config hash.
void write_ensemble_manifest(const std::string& dir,
                             const std::vector<ModelBundle>& bundles,
                             const std::string& config_hash);

// Human summary of a manifest.json produced by write_ensemble_manifest.
std::string describe_manifest(const std::string& manifest_path);

}  // namespace agrifed::ensemble

#endif  // AGRIFED_ENSEMBLE_HPP_
