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

#include "agrifed/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "agrifed/checkpoint.hpp"
#include "agrifed/errors.hpp"

namespace agrifed::ensemble {

namespace {

using nlohmann::json;

double rank_weight(int rank, std::size_t k, RankToWeight mode) {
  switch (mode) {
    case RankToWeight::inverse_rank:
      return 1.0 / static_cast<double>(rank);
    case RankToWeight::linear_reversed:
      return static_cast<double>(k) - static_cast<double>(rank) + 1.0;
  }
  throw std::invalid_argument("unknown rank weighting");
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (early_stopping.patience < 0)
    throw std::invalid_argument("train: patience must be >= 0");
  lr.validate();
}

ModelBundle train_local(const data::SiloDataset& train, const data::SiloDataset& val,
                        const nn::ModelSpec& spec, const TrainConfig& cfg,
                        const dp::PrivacySpec* dp_spec,
                        const data::FeatureStats& stats,
                        double* epsilon_spent) {
  cfg.validate();
  if (train.size() < 1)
    throw std::invalid_argument("train_local: empty train split for silo '" +
                                train.silo_id + "'");

  // Each epoch runs as one single-epoch round so the learning-rate schedule
  // sees cumulative epoch indices exactly like the federated path.
  fed::FedConfig step_cfg;
  step_cfg.rounds = 1;
  step_cfg.fraction = 1.0;
  step_cfg.local_epochs = 1;
  step_cfg.batch_size = cfg.batch_size;
  step_cfg.lr = cfg.lr;
  step_cfg.early_stopping.enabled = false;
  step_cfg.seed = cfg.seed;

  ModelBundle bundle;
  bundle.silo_id = train.silo_id;
  bundle.train_location = train.location;
  bundle.norm_stats = stats;
  bundle.params = nn::init_model(spec, cfg.seed);

  dp::AccountantState accountant;
  if (dp_spec != nullptr) {
    dp_spec->validate();
    const double q = std::min(
        1.0, static_cast<double>(cfg.batch_size) /
                 std::max<double>(1.0, static_cast<double>(train.size())));
    accountant = dp::make_accountant(q, dp_spec->noise_multiplier);
  }

  double best_val = std::numeric_limits<double>::infinity();
  ParameterSet best_params = bundle.params;
  bool have_best = false;
  int epochs_without_improvement = 0;

  for (long long e = 0; e < cfg.epochs; ++e) {
    if (dp_spec != nullptr && dp::budget_exhausted(accountant, *dp_spec)) break;

    fed::SiloUpdateResult up = fed::silo_update(
        bundle.params, spec, train, step_cfg,
        dp_spec, dp_spec != nullptr ? &accountant : nullptr, e);
    bundle.params = std::move(up.local);
    if (up.budget_stopped) break;

    if (cfg.early_stopping.enabled && val.size() > 0) {
      const double val_loss = nn::loss_mse(
          nn::forward_eval(spec, bundle.params, val.features), val.targets);
      if (val_loss < best_val) {
        best_val = val_loss;
        best_params = bundle.params;
        have_best = true;
        epochs_without_improvement = 0;
      } else {
        ++epochs_without_improvement;
        if (epochs_without_improvement >= cfg.early_stopping.patience) break;
      }
    }
  }
  if (cfg.early_stopping.enabled && have_best) bundle.params = std::move(best_params);
  if (epsilon_spent != nullptr)
    *epsilon_spent =
        dp_spec != nullptr ? dp::epsilon(accountant, dp_spec->delta) : 0.0;
  return bundle;
}

std::map<std::string, int> rank_distances(const data::GeoPoint& query,
                                          const std::vector<ModelBundle>& bundles) {
  if (bundles.empty()) throw std::invalid_argument("rank_distances: no bundles");

  std::vector<std::pair<double, std::string>> by_distance;
  for (const auto& b : bundles)
    by_distance.emplace_back(data::haversine_km(query, b.train_location), b.silo_id);
  std::sort(by_distance.begin(), by_distance.end());  // ties fall to silo-id order

  std::map<std::string, int> ranks;
  for (std::size_t i = 0; i < by_distance.size(); ++i)
    ranks[by_distance[i].second] = static_cast<int>(i) + 1;
  if (ranks.size() != bundles.size())
    throw std::invalid_argument("rank_distances: duplicate silo ids");
  return ranks;
}

double predict_ensemble(const Eigen::RowVectorXd& raw_features,
                        const data::GeoPoint& query,
                        const std::vector<ModelBundle>& bundles,
                        const nn::ModelSpec& spec, const RankWeighting& weighting) {
  if (bundles.empty()) throw std::invalid_argument("predict_ensemble: no bundles");
  if (raw_features.size() != spec.input_dim)
    throw std::invalid_argument("predict_ensemble: feature dimension mismatch");

  std::map<std::string, int> ranks;
  if (weighting.mode == WeightingMode::distance_rank)
    ranks = rank_distances(query, bundles);

  // Canonical silo-id order keeps the weighted sum bit-stable regardless of
  // the bundle list's order.
  std::vector<const ModelBundle*> ordered;
  for (const auto& b : bundles) ordered.push_back(&b);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->silo_id < b->silo_id; });

  double weighted_sum = 0.0, weight_total = 0.0;
  for (const ModelBundle* b : ordered) {
    const Eigen::MatrixXd x =
        data::apply_feature_stats(raw_features, b->norm_stats);
    const double pred = nn::forward_eval(spec, b->params, x)[0];
    const double w =
        weighting.mode == WeightingMode::uniform
            ? 1.0
            : rank_weight(ranks.at(b->silo_id), bundles.size(),
                          weighting.rank_to_weight);
    weighted_sum += w * pred;
    weight_total += w;
  }
  return weighted_sum / weight_total;
}

std::map<std::string, double> evaluate_ensemble(
    const std::vector<ModelBundle>& bundles, const nn::ModelSpec& spec,
    const std::vector<data::SiloDataset>& raw_test_silos,
    const RankWeighting& weighting) {
  if (raw_test_silos.empty())
    throw std::invalid_argument("evaluate_ensemble: no test silos");

  std::map<std::string, double> rmse;
  for (const auto& silo : raw_test_silos) {
    if (silo.size() < 1)
      throw std::invalid_argument("evaluate_ensemble: empty test split for silo '" +
                                  silo.silo_id + "'");
    double sq_sum = 0.0;
    for (Eigen::Index i = 0; i < silo.size(); ++i) {
      const double pred = predict_ensemble(silo.features.row(i), silo.location,
                                           bundles, spec, weighting);
      const double r = pred - silo.targets[i];
      sq_sum += r * r;
    }
    rmse[silo.silo_id] = std::sqrt(sq_sum / static_cast<double>(silo.size()));
  }
  return rmse;
}

void write_ensemble_manifest(const std::string& dir,
                             const std::vector<ModelBundle>& bundles,
                             const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["config_hash"] = config_hash;
  manifest["bundles"] = json::array();
  for (const auto& b : bundles) {
    const std::string ckpt = b.silo_id + ".ckpt";
    save_checkpoint(dir + "/" + ckpt, b.params);
    json entry;
    entry["silo_id"] = b.silo_id;
    entry["checkpoint"] = ckpt;
    entry["lat"] = b.train_location.lat;
    entry["lon"] = b.train_location.lon;
    entry["norm_mean"] = std::vector<double>(
        b.norm_stats.mean.data(), b.norm_stats.mean.data() + b.norm_stats.mean.size());
    entry["norm_stddev"] = std::vector<double>(
        b.norm_stats.stddev.data(),
        b.norm_stats.stddev.data() + b.norm_stats.stddev.size());
    manifest["bundles"].push_back(entry);
  }
  std::ofstream os(dir + "/manifest.json", std::ios::trunc);
  if (!os) throw IoError("cannot write manifest in " + dir);
  os << manifest.dump(2) << "\n";
}

std::string describe_manifest(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw IoError("cannot open manifest: " + manifest_path);
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw IoError("bad manifest " + manifest_path + ": " + e.what());
  }
  std::ostringstream os;
  os << manifest_path << ": " << manifest["bundles"].size() << " bundles, "
     << "config " << manifest.value("config_hash", "?") << "\n";
  for (const auto& b : manifest["bundles"])
    os << "  " << b.value("silo_id", "?") << " @ (" << b.value("lat", 0.0) << ", "
       << b.value("lon", 0.0) << ") -> " << b.value("checkpoint", "?") << "\n";
  return os.str();
}

}  // namespace agrifed::ensemble
