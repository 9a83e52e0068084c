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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <vector>

#include "agrifed/checkpoint.hpp"
#include "agrifed/data.hpp"
#include "agrifed/ensemble.hpp"
#include "agrifed/errors.hpp"
#include "agrifed/model.hpp"

using namespace agrifed;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nn::ModelSpec tiny_spec(int input_dim = 2) {
  nn::ModelSpec spec;
  spec.input_dim = input_dim;
  spec.hidden = {{4, false}};
  return spec;
}

void set_entry(ParameterSet& p, const std::string& name, double value) {
  NamedTensor* t = p.find(name);
  REQUIRE(t != nullptr);
  std::fill(t->values.begin(), t->values.end(), value);
}

// A bundle whose network ignores its input and predicts `value`.
ensemble::ModelBundle constant_bundle(const std::string& id, double value,
                                      const data::GeoPoint& where,
                                      const nn::ModelSpec& spec) {
  ensemble::ModelBundle b;
  b.silo_id = id;
  b.train_location = where;
  b.params = nn::init_model(spec, 1);
  set_entry(b.params, "head.weight", 0.0);
  set_entry(b.params, "head.bias", value);
  b.norm_stats.mean = Eigen::VectorXd::Zero(spec.input_dim);
  b.norm_stats.stddev = Eigen::VectorXd::Ones(spec.input_dim);
  return b;
}

data::SiloDataset linear_silo(const std::string& id, int n, std::uint64_t seed,
                              double lat = 40.0, double lon = -90.0) {
  data::SiloDataset ds;
  ds.silo_id = id;
  ds.location = {lat, lon};
  ds.features.resize(n, 2);
  ds.targets.resize(n);
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    ds.features(i, 0) = normal(eng);
    ds.features(i, 1) = normal(eng);
    ds.targets(i) =
        1.5 + 0.8 * ds.features(i, 0) - 0.4 * ds.features(i, 1) + 0.05 * normal(eng);
    ds.years.push_back(2015);
  }
  return ds;
}

data::FeatureStats unit_stats(int d) {
  data::FeatureStats s;
  s.mean = Eigen::VectorXd::Zero(d);
  s.stddev = Eigen::VectorXd::Ones(d);
  return s;
}

bool params_equal(const ParameterSet& a, const ParameterSet& b) {
  return bitwise_equal(a, b);
}

}  // namespace

TEST_CASE("rank_distances orders by great-circle distance, ties by id") {
  const nn::ModelSpec spec = tiny_spec();
  std::vector<ensemble::ModelBundle> bundles;
  bundles.push_back(constant_bundle("far", 0.0, {44.0, -86.0}, spec));
  bundles.push_back(constant_bundle("near", 0.0, {40.1, -90.0}, spec));
  bundles.push_back(constant_bundle("home", 0.0, {40.0, -90.0}, spec));
  bundles.push_back(constant_bundle("mid", 0.0, {41.5, -92.0}, spec));

  const data::GeoPoint query{40.0, -90.0};
  const auto ranks = ensemble::rank_distances(query, bundles);
  CHECK(ranks.at("home") == 1);
  CHECK(ranks.at("near") == 2);
  CHECK(ranks.at("mid") == 3);
  CHECK(ranks.at("far") == 4);

  // Independent oracle: sort (distance, id) pairs.
  std::vector<std::pair<double, std::string>> order;
  for (const auto& b : bundles)
    order.emplace_back(data::haversine_km(query, b.train_location), b.silo_id);
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size(); ++i)
    CHECK(ranks.at(order[i].second) == static_cast<int>(i) + 1);

  // Co-located bundles: rank order falls back to the id.
  std::vector<ensemble::ModelBundle> tied;
  tied.push_back(constant_bundle("b", 0.0, {40.0, -90.0}, spec));
  tied.push_back(constant_bundle("a", 0.0, {40.0, -90.0}, spec));
  const auto tie_ranks = ensemble::rank_distances(query, tied);
  CHECK(tie_ranks.at("a") == 1);
  CHECK(tie_ranks.at("b") == 2);
}

TEST_CASE("predict_ensemble combines members by proximity weight") {
  const nn::ModelSpec spec = tiny_spec();
  const data::GeoPoint query{40.0, -90.0};
  const Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(2);

  // Ranks 1, 2, 3 predicting 1, 2, 3.
  std::vector<ensemble::ModelBundle> bundles;
  bundles.push_back(constant_bundle("r1", 1.0, {40.0, -90.0}, spec));
  bundles.push_back(constant_bundle("r2", 2.0, {41.0, -90.0}, spec));
  bundles.push_back(constant_bundle("r3", 3.0, {43.0, -90.0}, spec));

  ensemble::RankWeighting w;
  w.mode = ensemble::WeightingMode::distance_rank;
  w.rank_to_weight = ensemble::RankToWeight::inverse_rank;
  // Weights 1, 1/2, 1/3 normalized: (1 + 1 + 1) / (11/6) = 18/11.
  CHECK(ensemble::predict_ensemble(row, query, bundles, spec, w) ==
        doctest::Approx(18.0 / 11.0).epsilon(1e-12));

  w.rank_to_weight = ensemble::RankToWeight::linear_reversed;
  // Weights 3, 2, 1 normalized: (3 + 4 + 3) / 6 = 10/6.
  CHECK(ensemble::predict_ensemble(row, query, bundles, spec, w) ==
        doctest::Approx(10.0 / 6.0).epsilon(1e-12));

  w.mode = ensemble::WeightingMode::uniform;
  CHECK(ensemble::predict_ensemble(row, query, bundles, spec, w) ==
        doctest::Approx(2.0).epsilon(1e-12));

  // All members agreeing is a fixed point for every weighting.
  std::vector<ensemble::ModelBundle> same;
  same.push_back(constant_bundle("x", 0.6, {40.0, -90.0}, spec));
  same.push_back(constant_bundle("y", 0.6, {42.0, -91.0}, spec));
  for (auto mode : {ensemble::WeightingMode::uniform,
                    ensemble::WeightingMode::distance_rank}) {
    ensemble::RankWeighting ww;
    ww.mode = mode;
    CHECK(ensemble::predict_ensemble(row, query, same, spec, ww) ==
          doctest::Approx(0.6).epsilon(1e-12));
  }

  // Single member: exactly its own output.
  std::vector<ensemble::ModelBundle> solo;
  solo.push_back(constant_bundle("s", -2.25, {44.0, -87.0}, spec));
  CHECK(ensemble::predict_ensemble(row, query, solo, spec, w) ==
        doctest::Approx(-2.25).epsilon(1e-15));
}

TEST_CASE("predictions stay inside the members' range and ignore input order") {
  const nn::ModelSpec spec = tiny_spec();
  const data::GeoPoint query{41.0, -93.0};
  std::mt19937_64 eng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::RowVectorXd row(2);
  row << normal(eng), normal(eng);

  std::vector<ensemble::ModelBundle> bundles;
  for (int i = 0; i < 4; ++i) {
    ensemble::ModelBundle b;
    b.silo_id = "m" + std::to_string(i);
    b.train_location = {38.0 + i, -95.0 + 2.0 * i};
    b.params = nn::init_model(spec, 100 + static_cast<std::uint64_t>(i));
    b.norm_stats = unit_stats(2);
    bundles.push_back(std::move(b));
  }

  double lo = kInf, hi = -kInf;
  for (const auto& b : bundles) {
    const double p =
        nn::forward_eval(spec, b.params, row.matrix())(0);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  for (auto rw : {ensemble::RankToWeight::inverse_rank,
                  ensemble::RankToWeight::linear_reversed}) {
    ensemble::RankWeighting w;
    w.mode = ensemble::WeightingMode::distance_rank;
    w.rank_to_weight = rw;
    const double p = ensemble::predict_ensemble(row, query, bundles, spec, w);
    CHECK(p >= lo - 1e-12);
    CHECK(p <= hi + 1e-12);
  }

  ensemble::RankWeighting uniform;
  uniform.mode = ensemble::WeightingMode::uniform;
  const double before = ensemble::predict_ensemble(row, query, bundles, spec, uniform);
  std::reverse(bundles.begin(), bundles.end());
  const double after = ensemble::predict_ensemble(row, query, bundles, spec, uniform);
  CHECK(before == doctest::Approx(after).epsilon(1e-15));
}

TEST_CASE("each member normalizes the query row with its own statistics") {
  // One ReLU unit wired as identity: output = max(normalized_input, 0).
  nn::ModelSpec spec;
  spec.input_dim = 1;
  spec.hidden = {{1, false}};

  ensemble::ModelBundle shifted;
  shifted.silo_id = "shifted";
  shifted.train_location = {40.0, -90.0};
  shifted.params = nn::init_model(spec, 1);
  set_entry(shifted.params, "layer0.weight", 1.0);
  set_entry(shifted.params, "layer0.bias", 0.0);
  set_entry(shifted.params, "head.weight", 1.0);
  set_entry(shifted.params, "head.bias", 0.0);
  shifted.norm_stats.mean = Eigen::VectorXd::Constant(1, 10.0);
  shifted.norm_stats.stddev = Eigen::VectorXd::Constant(1, 2.0);

  Eigen::RowVectorXd row(1);
  row << 14.0;  // normalizes to (14 - 10) / 2 = 2
  ensemble::RankWeighting w;
  w.mode = ensemble::WeightingMode::uniform;
  const data::GeoPoint query{40.0, -90.0};
  CHECK(ensemble::predict_ensemble(row, query, {shifted}, spec, w) ==
        doctest::Approx(2.0).epsilon(1e-12));

  ensemble::ModelBundle plain = shifted;
  plain.silo_id = "plain";
  plain.norm_stats = unit_stats(1);  // sees the raw 14
  CHECK(ensemble::predict_ensemble(row, query, {plain}, spec, w) ==
        doctest::Approx(14.0).epsilon(1e-12));

  // Together under uniform weighting: (2 + 14) / 2.
  CHECK(ensemble::predict_ensemble(row, query, {shifted, plain}, spec, w) ==
        doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("train_local is deterministic and actually learns") {
  const nn::ModelSpec spec = tiny_spec();
  const data::SiloDataset train = linear_silo("farm", 48, 7);
  const data::SiloDataset val = linear_silo("farm", 16, 71);

  ensemble::TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 8;
  cfg.lr.base = 0.02;
  cfg.early_stopping.enabled = true;
  cfg.early_stopping.patience = 10;
  cfg.seed = 5;

  double eps = -1.0;
  const ensemble::ModelBundle a =
      ensemble::train_local(train, val, spec, cfg, nullptr, unit_stats(2), &eps);
  const ensemble::ModelBundle b =
      ensemble::train_local(train, val, spec, cfg, nullptr, unit_stats(2));
  CHECK(params_equal(a.params, b.params));
  CHECK(eps == 0.0);  // no privacy engaged
  CHECK(a.silo_id == "farm");
  CHECK(a.train_location.lat == 40.0);
  CHECK(a.norm_stats.mean.size() == 2);

  const data::SiloDataset test = linear_silo("farm", 24, 72);
  auto rmse_with = [&](const ParameterSet& p) {
    const Eigen::VectorXd preds = nn::forward_eval(spec, p, test.features);
    return std::sqrt(nn::loss_mse(preds, test.targets));
  };
  CHECK(rmse_with(a.params) < 0.6 * rmse_with(nn::init_model(spec, cfg.seed)));
}

TEST_CASE("noiseless unclipped local DP training matches the plain path") {
  const nn::ModelSpec spec = tiny_spec();
  const data::SiloDataset train = linear_silo("farm", 32, 3);
  const data::SiloDataset val = linear_silo("farm", 12, 31);

  ensemble::TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 8;
  cfg.lr.base = 0.02;
  cfg.early_stopping.enabled = false;
  cfg.seed = 9;

  const ensemble::ModelBundle plain =
      ensemble::train_local(train, val, spec, cfg, nullptr, unit_stats(2));

  dp::PrivacySpec dps;
  dps.clip_norm = kInf;
  dps.noise_multiplier = 0.0;
  dps.epsilon_budget = kInf;
  double eps = -1.0;
  const ensemble::ModelBundle noiseless =
      ensemble::train_local(train, val, spec, cfg, &dps, unit_stats(2), &eps);

  REQUIRE(same_structure(plain.params, noiseless.params));
  double gap = 0.0;
  for (std::size_t e = 0; e < plain.params.entries.size(); ++e)
    for (std::size_t j = 0; j < plain.params.entries[e].values.size(); ++j)
      gap = std::max(gap, std::abs(plain.params.entries[e].values[j] -
                                   noiseless.params.entries[e].values[j]));
  CHECK(gap < 1e-9);
  CHECK(std::isinf(eps));  // sigma 0 spends everything it has
}

TEST_CASE("a tight budget stops local DP training and reports epsilon") {
  const nn::ModelSpec spec = tiny_spec();
  const data::SiloDataset train = linear_silo("farm", 32, 3);
  const data::SiloDataset val = linear_silo("farm", 12, 31);

  ensemble::TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.lr.base = 0.01;
  cfg.early_stopping.enabled = false;
  cfg.seed = 9;

  dp::PrivacySpec dps;
  dps.clip_norm = 5.0;
  dps.noise_multiplier = 1.2;
  dps.delta = 1e-5;
  dps.epsilon_budget = 2.0;

  double eps = -1.0;
  (void)ensemble::train_local(train, val, spec, cfg, &dps, unit_stats(2), &eps);
  CHECK(eps >= dps.epsilon_budget);
  CHECK(std::isfinite(eps));
}

TEST_CASE("evaluate_ensemble reports per-silo RMSE over raw rows") {
  const nn::ModelSpec spec = tiny_spec();
  std::vector<ensemble::ModelBundle> bundles;
  bundles.push_back(constant_bundle("a", 2.0, {40.0, -90.0}, spec));
  bundles.push_back(constant_bundle("b", 4.0, {44.0, -86.0}, spec));

  data::SiloDataset test = linear_silo("a", 10, 44, 40.0, -90.0);
  test.targets.setConstant(3.0);

  ensemble::RankWeighting uniform;
  uniform.mode = ensemble::WeightingMode::uniform;
  const auto scores = ensemble::evaluate_ensemble(bundles, spec, {test}, uniform);
  REQUIRE(scores.count("a") == 1);
  // Every prediction is (2 + 4) / 2 = 3 and every target is 3.
  CHECK(scores.at("a") == doctest::Approx(0.0).epsilon(1e-12));

  // Rank weighting from silo a's location: weights 1, 1/2 -> 2*(2/3)+4*(1/3).
  ensemble::RankWeighting ranked;
  ranked.mode = ensemble::WeightingMode::distance_rank;
  ranked.rank_to_weight = ensemble::RankToWeight::inverse_rank;
  const auto ranked_scores =
      ensemble::evaluate_ensemble(bundles, spec, {test}, ranked);
  const double pred = 2.0 * (2.0 / 3.0) + 4.0 / 3.0;
  CHECK(ranked_scores.at("a") ==
        doctest::Approx(std::abs(pred - 3.0)).epsilon(1e-9));
}

TEST_CASE("ensemble manifests round trip through checkpoints") {
  const nn::ModelSpec spec = tiny_spec();
  const auto dir = std::filesystem::temp_directory_path() / "agrifed_manifest_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  std::vector<ensemble::ModelBundle> bundles;
  for (int i = 0; i < 3; ++i) {
    ensemble::ModelBundle b;
    b.silo_id = "silo" + std::to_string(i);
    b.train_location = {39.0 + i, -95.0 + i};
    b.params = nn::init_model(spec, 50 + static_cast<std::uint64_t>(i));
    b.norm_stats = unit_stats(2);
    bundles.push_back(std::move(b));
  }
  ensemble::write_ensemble_manifest(dir.string(), bundles, "cafebabe12345678");

  CHECK(std::filesystem::exists(dir / "manifest.json"));
  for (const auto& b : bundles) {
    const auto ckpt = dir / (b.silo_id + ".ckpt");
    REQUIRE(std::filesystem::exists(ckpt));
    CHECK(params_equal(load_checkpoint(ckpt.string()), b.params));
  }

  const std::string text = ensemble::describe_manifest((dir / "manifest.json").string());
  CHECK(text.find("cafebabe12345678") != std::string::npos);
  CHECK(text.find("silo0") != std::string::npos);
  CHECK(text.find("silo2") != std::string::npos);

  CHECK_THROWS_AS((void)ensemble::describe_manifest((dir / "nope.json").string()),
                  IoError);
  {
    std::ofstream bad(dir / "broken.json");
    bad << "{ not json";
  }
  CHECK_THROWS_AS((void)ensemble::describe_manifest((dir / "broken.json").string()),
                  IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("train config validation") {
  ensemble::TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  ensemble::TrainConfig bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
