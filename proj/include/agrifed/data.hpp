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

#ifndef AGRIFED_DATA_HPP_
#define AGRIFED_DATA_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace agrifed::data {

struct GeoPoint {
  double lat = 0.0;  // degrees in [-90, 90]
  double lon = 0.0;  // degrees in [-180, 180]
  void validate() const;
};

// Great-circle distance in kilometers (haversine, mean earth radius).
double haversine_km(const GeoPoint& a, const GeoPoint& b);

// One client's data: feature rows, yield targets, harvest years, location.
struct SiloDataset {
  std::string silo_id;
  GeoPoint location;
  Eigen::MatrixXd features;  // [n x feature_dim]
  Eigen::VectorXd targets;   // [n]
  std::vector<int> years;    // [n]

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index feature_dim() const { return features.cols(); }
  void validate() const;
};

// Per-silo heterogeneity controls. `scale`/`offset` are base vectors from
// which each silo draws its own affine feature map; `concept_magnitude`
// scales per-silo perturbations of the label function's coefficients;
// `noise_std` is the observation noise on targets.
struct ShiftSpec {
  Eigen::VectorXd scale;   // entries > 0; 1.0 means no scale shift
  Eigen::VectorXd offset;  // 0.0 means no offset shift
  double concept_magnitude = 0.0;
  double noise_std = 0.0;
  void validate(int feature_dim) const;
};

enum class GeoLayout { grid, random };

struct GeneratorConfig {
  int n_silos = 2;
  int per_silo_n = 10;
  int feature_dim = 3;
  ShiftSpec shift;
  GeoLayout geo_layout = GeoLayout::grid;
  int year_min = 2010;
  int year_max = 2017;
  void validate() const;
};

// Synthetic federation. Base features are standard normal, passed through
// the silo's affine map; targets come from a fixed nonlinear ground truth
// whose coefficients are perturbed per silo with spatial correlation (a
// Gaussian process over silo locations), so geography carries signal.
// Deterministic in (config, seed).
std::vector<SiloDataset> generate_silos(const GeneratorConfig& cfg,
                                        std::uint64_t seed);

struct CsvSchema {
  std::vector<std::string> feature_columns;
  std::string target_column;
  std::string year_column;
  std::string silo_column;
  std::string lat_column;
  std::string lon_column;
  void validate() const;
};

struct LoadReport {
  std::map<std::string, std::size_t> kept_per_silo;
  std::size_t dropped_rows = 0;
};

// One SiloDataset per distinct silo column value; rows with missing or
// non-finite fields are dropped and counted in the report.
std::vector<SiloDataset> load_csv(const std::string& path, const CsvSchema& schema,
                                  LoadReport* report = nullptr);

// Inverse of load_csv for generated data; columns silo,lat,lon,year,target,
// then the feature columns. Values printed with full precision.
void write_csv(const std::string& path, const std::vector<SiloDataset>& silos,
               const CsvSchema& schema);

// Default column names used when exporting synthetic data.
CsvSchema synthetic_schema(int feature_dim);

struct SplitPlan {
  int test_year = 0;
  double val_fraction = 0.15;
  void validate() const;
};

struct SplitResult {
  SiloDataset train, val, test;
  std::size_t dropped_future_rows = 0;  // records with year > test_year
};

// Year-forward split: test = records at test_year; earlier records are
// shuffled by seed and divided val/train (floor rule on the val count).
// Records from years after test_year are excluded so no future data leaks
// into training; their count is reported.
SplitResult split(const SiloDataset& ds, const SplitPlan& plan, std::uint64_t seed);

// Per-band normalized histogram featurization. `raster` is [bands x pixels];
// the result concatenates each band's b-bin frequency vector (band-major).
// Out-of-range pixels clamp into the end bins.
Eigen::VectorXd featurize_histogram(const Eigen::MatrixXd& raster,
                                    const Eigen::VectorXd& bin_edges);

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;      // floored so division is safe
  int floored_features = 0;    // how many features hit the variance floor
};

enum class NormalizationMode { per_silo, global };

// Z-score statistics from feature rows (train splits only, by contract).
// Zero-variance features are floored at variance 1e-8 and counted.
FeatureStats compute_feature_stats(const Eigen::MatrixXd& features);

Eigen::MatrixXd apply_feature_stats(const Eigen::MatrixXd& features,
                                    const FeatureStats& stats);

}  // namespace agrifed::data

#endif  // AGRIFED_DATA_HPP_
