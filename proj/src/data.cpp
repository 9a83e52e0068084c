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

#include "agrifed/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "agrifed/errors.hpp"
#include "agrifed/rng.hpp"

namespace agrifed::data {

namespace {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kPi = 3.14159265358979323846;
constexpr double kVarianceFloor = 1e-8;

// Geographic box the synthetic federation lives in (roughly the US corn belt).
constexpr double kLatMin = 36.0, kLatMax = 44.0;
constexpr double kLonMin = -102.0, kLonMax = -86.0;

double deg2rad(double d) { return d * kPi / 180.0; }

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

bool parse_int(const std::string& s, int* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) return false;
  *out = static_cast<int>(v);
  return true;
}

std::vector<GeoPoint> layout_locations(int n_silos, GeoLayout layout,
                                       std::uint64_t seed) {
  std::vector<GeoPoint> locs(static_cast<std::size_t>(n_silos));
  if (layout == GeoLayout::grid) {
    const int g = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_silos))));
    const int rows = (n_silos + g - 1) / g;
    for (int k = 0; k < n_silos; ++k) {
      const int r = k / g, c = k % g;
      const double fr = rows > 1 ? static_cast<double>(r) / (rows - 1) : 0.5;
      const double fc = g > 1 ? static_cast<double>(c) / (g - 1) : 0.5;
      locs[static_cast<std::size_t>(k)] = {kLatMin + fr * (kLatMax - kLatMin),
                                           kLonMin + fc * (kLonMax - kLonMin)};
    }
  } else {
    auto eng = rng::engine(rng::derive(seed, rng::Stream::gen_federation, 1));
    std::uniform_real_distribution<double> ulat(kLatMin, kLatMax);
    std::uniform_real_distribution<double> ulon(kLonMin, kLonMax);
    for (auto& p : locs) {
      p.lat = ulat(eng);
      p.lon = ulon(eng);
    }
  }
  return locs;
}

// Spatially correlated standard-normal field over the silo locations: one
// draw per silo, nearer silos more similar (squared-exponential kernel with
// length scale half the layout diameter).
Eigen::MatrixXd correlated_fields(const std::vector<GeoPoint>& locs, int n_fields,
                                  std::uint64_t seed) {
  const int k = static_cast<int>(locs.size());
  Eigen::MatrixXd dist(k, k);
  double max_d = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      dist(i, j) = haversine_km(locs[static_cast<std::size_t>(i)],
                                locs[static_cast<std::size_t>(j)]);
      max_d = std::max(max_d, dist(i, j));
    }
  const double ell = max_d > 0.0 ? 0.5 * max_d : 1.0;

  Eigen::MatrixXd kernel =
      (-dist.array().square() / (2.0 * ell * ell)).exp().matrix();
  double jitter = 1e-8;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (int attempt = 0; attempt < 8; ++attempt) {
    llt.compute(kernel + jitter * Eigen::MatrixXd::Identity(k, k));
    if (llt.info() == Eigen::Success) break;
    jitter *= 10.0;
  }
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("spatial kernel factorization failed");
  const Eigen::MatrixXd chol = llt.matrixL();

  auto eng = rng::engine(rng::derive(seed, rng::Stream::gen_federation, 2));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(k, n_fields);
  for (int j = 0; j < n_fields; ++j)
    for (int i = 0; i < k; ++i) z(i, j) = normal(eng);
  return chol * z;  // column j: field j over silos
}

SiloDataset subset(const SiloDataset& ds, const std::vector<Eigen::Index>& idx) {
  SiloDataset out;
  out.silo_id = ds.silo_id;
  out.location = ds.location;
  out.features.resize(static_cast<Eigen::Index>(idx.size()), ds.features.cols());
  out.targets.resize(static_cast<Eigen::Index>(idx.size()));
  out.years.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(idx[i]);
    out.targets[static_cast<Eigen::Index>(i)] = ds.targets[idx[i]];
    out.years[i] = ds.years[static_cast<std::size_t>(idx[i])];
  }
  return out;
}

}  // namespace

void GeoPoint::validate() const {
  if (!(lat >= -90.0 && lat <= 90.0))
    throw std::invalid_argument("GeoPoint: latitude out of [-90, 90]");
  if (!(lon >= -180.0 && lon <= 180.0))
    throw std::invalid_argument("GeoPoint: longitude out of [-180, 180]");
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double lat1 = deg2rad(a.lat), lat2 = deg2rad(b.lat);
  const double dlat = lat2 - lat1;
  const double dlon = deg2rad(b.lon - a.lon);
  const double s = std::sin(dlat / 2.0) * std::sin(dlat / 2.0) +
                   std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2.0) *
                       std::sin(dlon / 2.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

void SiloDataset::validate() const {
  if (silo_id.empty()) throw std::invalid_argument("SiloDataset: empty silo id");
  location.validate();
  if (targets.size() != features.rows() ||
      years.size() != static_cast<std::size_t>(features.rows()))
    throw std::invalid_argument("SiloDataset: record count mismatch in " + silo_id);
  if (!features.allFinite() || !targets.allFinite())
    throw std::invalid_argument("SiloDataset: non-finite values in " + silo_id);
}

void ShiftSpec::validate(int feature_dim) const {
  if (scale.size() != feature_dim || offset.size() != feature_dim)
    throw std::invalid_argument("ShiftSpec: scale/offset length must equal feature_dim");
  if ((scale.array() <= 0.0).any())
    throw std::invalid_argument("ShiftSpec: scale entries must be > 0");
  if (concept_magnitude < 0.0 || noise_std < 0.0)
    throw std::invalid_argument("ShiftSpec: magnitude and noise_std must be >= 0");
}

void GeneratorConfig::validate() const {
  if (n_silos < 2) throw std::invalid_argument("generator: n_silos must be >= 2");
  if (per_silo_n < 10) throw std::invalid_argument("generator: per_silo_n must be >= 10");
  if (feature_dim < 3)
    throw std::invalid_argument(
        "generator: feature_dim must be >= 3 (ground truth uses three features)");
  if (year_min > year_max)
    throw std::invalid_argument("generator: year_min must be <= year_max");
  shift.validate(feature_dim);
}

std::vector<SiloDataset> generate_silos(const GeneratorConfig& cfg,
                                        std::uint64_t seed) {
  cfg.validate();
  const int k = cfg.n_silos;
  const int d = cfg.feature_dim;
  const std::vector<GeoPoint> locs = layout_locations(k, cfg.geo_layout, seed);

  // Federation-level ground-truth coefficients: y depends linearly on all
  // features plus an interaction and a sinusoid, around a positive baseline.
  auto fed_eng = rng::engine(rng::derive(seed, rng::Stream::gen_federation));
  std::uniform_real_distribution<double> ub(-2.0, 2.0);
  std::uniform_real_distribution<double> ug(1.0, 3.0);
  Eigen::VectorXd beta(d);
  for (int j = 0; j < d; ++j) beta[j] = ub(fed_eng);
  const double gamma = ug(fed_eng);
  const double kappa = ug(fed_eng);
  constexpr double kBaseYield = 40.0;

  // Per-silo coefficient perturbations, spatially correlated so that nearby
  // silos share similar label functions.
  const int n_coef = d + 2;
  Eigen::MatrixXd fields = Eigen::MatrixXd::Zero(k, n_coef);
  if (cfg.shift.concept_magnitude > 0.0)
    fields = correlated_fields(locs, n_coef, seed);

  const int year_span = cfg.year_max - cfg.year_min + 1;
  const int digits = std::max(2, static_cast<int>(std::to_string(k - 1).size()));

  std::vector<SiloDataset> silos(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s) {
    SiloDataset& ds = silos[static_cast<std::size_t>(s)];
    std::ostringstream id;
    id << "silo";
    std::string num = std::to_string(s);
    id << std::string(static_cast<std::size_t>(digits) - num.size(), '0') << num;
    ds.silo_id = id.str();
    ds.location = locs[static_cast<std::size_t>(s)];

    auto eng = rng::engine(
        rng::derive(seed, rng::Stream::gen_silo, static_cast<std::uint64_t>(s)));
    std::uniform_real_distribution<double> uexp(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Per-silo affine feature map: scale_j = base_scale_j^u (always > 0),
    // offset_j = base_offset_j * v, with u, v uniform in [-1, 1].
    Eigen::VectorXd silo_scale(d), silo_offset(d);
    for (int j = 0; j < d; ++j) silo_scale[j] = std::pow(cfg.shift.scale[j], uexp(eng));
    for (int j = 0; j < d; ++j) silo_offset[j] = cfg.shift.offset[j] * uexp(eng);

    Eigen::VectorXd silo_beta = beta;
    double silo_gamma = gamma, silo_kappa = kappa;
    if (cfg.shift.concept_magnitude > 0.0) {
      const double m = cfg.shift.concept_magnitude;
      for (int j = 0; j < d; ++j) silo_beta[j] = beta[j] * (1.0 + m * fields(s, j));
      silo_gamma = gamma * (1.0 + m * fields(s, d));
      silo_kappa = kappa * (1.0 + m * fields(s, d + 1));
    }

    const int n = cfg.per_silo_n;
    ds.features.resize(n, d);
    ds.targets.resize(n);
    ds.years.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd x(d);
      for (int j = 0; j < d; ++j) x[j] = silo_scale[j] * normal(eng) + silo_offset[j];
      double y = kBaseYield + silo_beta.dot(x) + silo_gamma * x[0] * x[1] +
                 silo_kappa * std::sin(x[2]);
      if (cfg.shift.noise_std > 0.0) y += cfg.shift.noise_std * normal(eng);
      ds.features.row(i) = x.transpose();
      ds.targets[i] = y;
      ds.years[static_cast<std::size_t>(i)] = cfg.year_min + (i % year_span);
    }
    ds.validate();
  }
  return silos;
}

void CsvSchema::validate() const {
  if (feature_columns.empty())
    throw ConfigError("data.feature_columns", "at least one feature column required");
  if (target_column.empty()) throw ConfigError("data.target_column", "required");
  if (year_column.empty()) throw ConfigError("data.year_column", "required");
  if (silo_column.empty()) throw ConfigError("data.silo_column", "required");
  if (lat_column.empty()) throw ConfigError("data.lat_column", "required");
  if (lon_column.empty()) throw ConfigError("data.lon_column", "required");
}

CsvSchema synthetic_schema(int feature_dim) {
  CsvSchema s;
  for (int j = 0; j < feature_dim; ++j)
    s.feature_columns.push_back("f" + std::to_string(j));
  s.target_column = "yield";
  s.year_column = "year";
  s.silo_column = "silo";
  s.lat_column = "lat";
  s.lon_column = "lon";
  return s;
}

std::vector<SiloDataset> load_csv(const std::string& path, const CsvSchema& schema,
                                  LoadReport* report) {
  schema.validate();
  std::ifstream is(path);
  if (!is) throw IoError("cannot open csv: " + path);

  std::string header;
  if (!std::getline(is, header)) throw IoError("empty csv: " + path);
  const std::vector<std::string> cols = split_line(header);
  auto col_index = [&](const std::string& name, const char* key) {
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end())
      throw ConfigError(std::string("data.") + key,
                        "column '" + name + "' not found in " + path);
    return static_cast<std::size_t>(it - cols.begin());
  };

  std::vector<std::size_t> f_idx;
  for (const auto& f : schema.feature_columns)
    f_idx.push_back(col_index(f, "feature_columns"));
  const std::size_t t_idx = col_index(schema.target_column, "target_column");
  const std::size_t y_idx = col_index(schema.year_column, "year_column");
  const std::size_t s_idx = col_index(schema.silo_column, "silo_column");
  const std::size_t la_idx = col_index(schema.lat_column, "lat_column");
  const std::size_t lo_idx = col_index(schema.lon_column, "lon_column");

  struct Rows {
    GeoPoint loc;
    std::vector<Eigen::VectorXd> features;
    std::vector<double> targets;
    std::vector<int> years;
  };
  std::map<std::string, Rows> by_silo;
  LoadReport local_report;

  std::size_t needed = 0;
  for (std::size_t idx : f_idx) needed = std::max(needed, idx);
  needed = std::max({needed, t_idx, y_idx, s_idx, la_idx, lo_idx});

  const int d = static_cast<int>(f_idx.size());
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_line(line);
    auto drop = [&] { ++local_report.dropped_rows; };
    if (cells.size() <= needed) {
      drop();
      continue;
    }

    Eigen::VectorXd x(d);
    bool ok = true;
    for (int j = 0; j < d; ++j)
      ok = ok && parse_double(cells[f_idx[static_cast<std::size_t>(j)]], &x[j]);
    double target = 0.0, lat = 0.0, lon = 0.0;
    int year = 0;
    ok = ok && parse_double(cells[t_idx], &target);
    ok = ok && parse_int(cells[y_idx], &year);
    ok = ok && parse_double(cells[la_idx], &lat);
    ok = ok && parse_double(cells[lo_idx], &lon);
    const std::string silo = cells[s_idx];
    ok = ok && !silo.empty();
    if (!ok) {
      drop();
      continue;
    }

    Rows& rows = by_silo[silo];
    if (rows.features.empty()) rows.loc = {lat, lon};
    rows.features.push_back(std::move(x));
    rows.targets.push_back(target);
    rows.years.push_back(year);
    ++local_report.kept_per_silo[silo];
  }

  if (by_silo.empty()) throw IoError("no usable rows in csv: " + path);

  std::vector<SiloDataset> silos;
  for (auto& [id, rows] : by_silo) {
    SiloDataset ds;
    ds.silo_id = id;
    ds.location = rows.loc;
    const auto n = static_cast<Eigen::Index>(rows.features.size());
    ds.features.resize(n, d);
    ds.targets.resize(n);
    ds.years = std::move(rows.years);
    for (Eigen::Index i = 0; i < n; ++i) {
      ds.features.row(i) = rows.features[static_cast<std::size_t>(i)].transpose();
      ds.targets[i] = rows.targets[static_cast<std::size_t>(i)];
    }
    ds.validate();
    silos.push_back(std::move(ds));
  }
  if (report != nullptr) *report = std::move(local_report);
  return silos;
}

void write_csv(const std::string& path, const std::vector<SiloDataset>& silos,
               const CsvSchema& schema) {
  schema.validate();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open csv for writing: " + path);

  os << schema.silo_column << ',' << schema.lat_column << ',' << schema.lon_column
     << ',' << schema.year_column << ',' << schema.target_column;
  for (const auto& f : schema.feature_columns) os << ',' << f;
  os << '\n';

  for (const auto& ds : silos) {
    if (ds.feature_dim() != static_cast<Eigen::Index>(schema.feature_columns.size()))
      throw std::invalid_argument("write_csv: feature dim does not match schema");
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      os << ds.silo_id << ',' << format_full(ds.location.lat) << ','
         << format_full(ds.location.lon) << ','
         << ds.years[static_cast<std::size_t>(i)] << ','
         << format_full(ds.targets[i]);
      for (Eigen::Index j = 0; j < ds.feature_dim(); ++j)
        os << ',' << format_full(ds.features(i, j));
      os << '\n';
    }
  }
  if (!os) throw IoError("csv write failed: " + path);
}

void SplitPlan::validate() const {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw std::invalid_argument("SplitPlan: val_fraction must be in (0, 1)");
}

SplitResult split(const SiloDataset& ds, const SplitPlan& plan, std::uint64_t seed) {
  plan.validate();
  std::vector<Eigen::Index> past, test, future;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    const int y = ds.years[static_cast<std::size_t>(i)];
    if (y == plan.test_year)
      test.push_back(i);
    else if (y < plan.test_year)
      past.push_back(i);
    else
      future.push_back(i);
  }
  if (test.empty())
    throw std::invalid_argument("split: silo '" + ds.silo_id +
                                "' has no records for test year " +
                                std::to_string(plan.test_year));
  if (past.empty())
    throw std::invalid_argument("split: silo '" + ds.silo_id +
                                "' has no records before test year " +
                                std::to_string(plan.test_year));

  auto eng = rng::engine(
      rng::derive(seed, rng::Stream::split, rng::fnv1a(ds.silo_id)));
  std::shuffle(past.begin(), past.end(), eng);

  const auto n_val = static_cast<std::size_t>(
      std::floor(plan.val_fraction * static_cast<double>(past.size())));
  std::vector<Eigen::Index> val_idx(past.begin(),
                                    past.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<Eigen::Index> train_idx(
      past.begin() + static_cast<std::ptrdiff_t>(n_val), past.end());

  SplitResult out;
  out.train = subset(ds, train_idx);
  out.val = subset(ds, val_idx);
  out.test = subset(ds, test);
  out.dropped_future_rows = future.size();
  return out;
}

Eigen::VectorXd featurize_histogram(const Eigen::MatrixXd& raster,
                                    const Eigen::VectorXd& bin_edges) {
  const Eigen::Index bands = raster.rows();
  const Eigen::Index pixels = raster.cols();
  const Eigen::Index b = bin_edges.size() - 1;
  if (b < 2) throw std::invalid_argument("histogram: need at least 2 bins");
  for (Eigen::Index i = 0; i + 1 < bin_edges.size(); ++i)
    if (!(bin_edges[i] < bin_edges[i + 1]))
      throw std::invalid_argument("histogram: bin edges must be strictly increasing");
  if (bands < 1 || pixels < 1)
    throw std::invalid_argument("histogram: empty raster");

  Eigen::VectorXd out = Eigen::VectorXd::Zero(bands * b);
  for (Eigen::Index band = 0; band < bands; ++band) {
    for (Eigen::Index p = 0; p < pixels; ++p) {
      const double v = raster(band, p);
      // Out-of-range pixels clamp into the end bins.
      Eigen::Index bin;
      if (v < bin_edges[0]) {
        bin = 0;
      } else if (v >= bin_edges[b]) {
        bin = b - 1;
      } else {
        const double* begin = bin_edges.data();
        bin = std::upper_bound(begin, begin + b + 1, v) - begin - 1;
        bin = std::min(bin, b - 1);
      }
      out[band * b + bin] += 1.0;
    }
    out.segment(band * b, b) /= static_cast<double>(pixels);
  }
  return out;
}

FeatureStats compute_feature_stats(const Eigen::MatrixXd& features) {
  if (features.rows() < 1)
    throw std::invalid_argument("feature stats: no rows");
  FeatureStats stats;
  stats.mean = features.colwise().mean().transpose();
  Eigen::VectorXd var = (features.rowwise() - stats.mean.transpose())
                            .array()
                            .square()
                            .colwise()
                            .mean()
                            .matrix()
                            .transpose();
  for (Eigen::Index j = 0; j < var.size(); ++j)
    if (var[j] < kVarianceFloor) {
      var[j] = kVarianceFloor;
      ++stats.floored_features;
    }
  stats.stddev = var.array().sqrt().matrix();
  return stats;
}

Eigen::MatrixXd apply_feature_stats(const Eigen::MatrixXd& features,
                                    const FeatureStats& stats) {
  if (features.cols() != stats.mean.size())
    throw std::invalid_argument("feature stats: dimension mismatch");
  return ((features.rowwise() - stats.mean.transpose()).array().rowwise() /
          stats.stddev.transpose().array())
      .matrix();
}

}  // namespace agrifed::data
