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

#include "agrifed/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "agrifed/checkpoint.hpp"
#include "agrifed/errors.hpp"
#include "agrifed/model.hpp"
#include "agrifed/privacy.hpp"

namespace agrifed::harness {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return kNaN;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double median_of(std::vector<double> values) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

nn::ModelSpec model_spec_for(const config::ParsedConfig& cfg,
                             Eigen::Index input_dim) {
  nn::ModelSpec spec;
  spec.input_dim = static_cast<int>(input_dim);
  for (int width : cfg.hidden) spec.hidden.push_back({width, cfg.use_bn});
  spec.validate();
  return spec;
}

// One silo's splits, normalized for training plus the raw test split the
// ensemble regimes query against.
struct PreparedSilo {
  data::SiloDataset train, val, test;  // normalized features
  data::SiloDataset raw_test;
  data::FeatureStats stats;            // the stats used to normalize
};

data::SiloDataset normalized_copy(const data::SiloDataset& ds,
                                  const data::FeatureStats& stats) {
  data::SiloDataset out = ds;
  out.features = data::apply_feature_stats(ds.features, stats);
  return out;
}

std::vector<PreparedSilo> prepare_silos(const config::ParsedConfig& cfg,
                                        int year, std::uint64_t seed,
                                        const std::vector<data::SiloDataset>& silos,
                                        std::set<std::string>& warnings) {
  if (silos.empty()) throw std::invalid_argument("no silos in dataset");

  std::vector<const data::SiloDataset*> ordered;
  ordered.reserve(silos.size());
  for (const auto& s : silos) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const data::SiloDataset* a, const data::SiloDataset* b) {
              return a->silo_id < b->silo_id;
            });

  data::SplitPlan plan;
  plan.test_year = year;

  std::vector<data::SplitResult> splits;
  splits.reserve(ordered.size());
  for (const auto* s : ordered) splits.push_back(data::split(*s, plan, seed));

  std::vector<data::FeatureStats> stats(ordered.size());
  if (cfg.normalization == data::NormalizationMode::per_silo) {
    for (std::size_t k = 0; k < splits.size(); ++k) {
      stats[k] = data::compute_feature_stats(splits[k].train.features);
      if (stats[k].floored_features > 0)
        warnings.insert("normalization: " +
                        std::to_string(stats[k].floored_features) +
                        " feature(s) at the variance floor in silo '" +
                        ordered[k]->silo_id + "'");
    }
  } else {
    Eigen::Index total = 0;
    for (const auto& sp : splits) total += sp.train.size();
    Eigen::MatrixXd pooled(total, ordered[0]->feature_dim());
    Eigen::Index at = 0;
    for (const auto& sp : splits) {
      pooled.middleRows(at, sp.train.size()) = sp.train.features;
      at += sp.train.size();
    }
    const data::FeatureStats shared = data::compute_feature_stats(pooled);
    if (shared.floored_features > 0)
      warnings.insert("normalization: " +
                      std::to_string(shared.floored_features) +
                      " feature(s) at the variance floor in the pooled train data");
    for (auto& st : stats) st = shared;
  }

  std::vector<PreparedSilo> prepared;
  prepared.reserve(ordered.size());
  for (std::size_t k = 0; k < splits.size(); ++k) {
    PreparedSilo p;
    p.stats = stats[k];
    p.train = normalized_copy(splits[k].train, stats[k]);
    p.val = normalized_copy(splits[k].val, stats[k]);
    p.test = normalized_copy(splits[k].test, stats[k]);
    p.raw_test = std::move(splits[k].test);
    if (splits[k].dropped_future_rows > 0)
      warnings.insert("split: silo '" + ordered[k]->silo_id + "' has records after " +
                      std::to_string(year) + "; they were excluded");
    prepared.push_back(std::move(p));
  }
  return prepared;
}

double rmse_of(const nn::ModelSpec& spec, const ParameterSet& params,
               const data::SiloDataset& test) {
  const Eigen::VectorXd preds = nn::forward_eval(spec, params, test.features);
  return std::sqrt(nn::loss_mse(preds, test.targets));
}

void warn_on_privacy_regime(const config::ParsedConfig& cfg, long long batch_size,
                            const std::vector<PreparedSilo>& prepared,
                            std::set<std::string>& warnings) {
  for (const auto& p : prepared) {
    const double q = std::min(
        1.0, static_cast<double>(batch_size) /
                 std::max<double>(1.0, static_cast<double>(p.train.size())));
    const auto note =
        dp::regime_warning(dp::make_accountant(q, cfg.privacy.noise_multiplier));
    if (note) warnings.insert("privacy: " + *note);
  }
}

void run_cell_impl(const config::ParsedConfig& cfg, Regime regime, int year,
                   std::uint64_t seed, const std::vector<data::SiloDataset>& silos,
                   CellResult& result) {
  std::set<std::string> warnings;
  std::vector<PreparedSilo> prepared = prepare_silos(cfg, year, seed, silos, warnings);
  const nn::ModelSpec spec = model_spec_for(cfg, prepared[0].train.feature_dim());

  const bool is_ldp =
      regime == Regime::model_sharing_ldp || regime == Regime::federated_ldp;
  const dp::PrivacySpec* dp_spec = is_ldp ? &cfg.privacy : nullptr;

  switch (regime) {
    case Regime::traditional_pooled: {
      data::SiloDataset train, val;
      train.silo_id = "pooled";
      val.silo_id = "pooled";
      Eigen::Index train_rows = 0, val_rows = 0;
      for (const auto& p : prepared) {
        train_rows += p.train.size();
        val_rows += p.val.size();
      }
      const Eigen::Index d = prepared[0].train.feature_dim();
      train.features.resize(train_rows, d);
      train.targets.resize(train_rows);
      val.features.resize(val_rows, d);
      val.targets.resize(val_rows);
      Eigen::Index ti = 0, vi = 0;
      for (const auto& p : prepared) {
        train.features.middleRows(ti, p.train.size()) = p.train.features;
        train.targets.segment(ti, p.train.size()) = p.train.targets;
        train.years.insert(train.years.end(), p.train.years.begin(), p.train.years.end());
        ti += p.train.size();
        val.features.middleRows(vi, p.val.size()) = p.val.features;
        val.targets.segment(vi, p.val.size()) = p.val.targets;
        val.years.insert(val.years.end(), p.val.years.begin(), p.val.years.end());
        vi += p.val.size();
      }

      ensemble::TrainConfig tc = cfg.local;
      tc.seed = seed;
      const data::FeatureStats pooled_stats =
          data::compute_feature_stats(train.features);
      const ensemble::ModelBundle bundle =
          ensemble::train_local(train, val, spec, tc, nullptr, pooled_stats);
      for (const auto& p : prepared)
        result.per_silo_rmse[p.test.silo_id] = rmse_of(spec, bundle.params, p.test);
      if (cfg.write_checkpoints)
        result.final_global = std::make_shared<ParameterSet>(bundle.params);
      break;
    }

    case Regime::local_only: {
      ensemble::TrainConfig tc = cfg.local;
      tc.seed = seed;
      auto bundles = std::make_shared<std::vector<ensemble::ModelBundle>>();
      for (const auto& p : prepared) {
        ensemble::ModelBundle b =
            ensemble::train_local(p.train, p.val, spec, tc, nullptr, p.stats);
        result.per_silo_rmse[p.test.silo_id] = rmse_of(spec, b.params, p.test);
        bundles->push_back(std::move(b));
      }
      if (cfg.write_checkpoints) result.bundles = std::move(bundles);
      break;
    }

    case Regime::model_sharing:
    case Regime::model_sharing_ldp: {
      if (dp_spec != nullptr)
        warn_on_privacy_regime(cfg, cfg.local.batch_size, prepared, warnings);
      ensemble::TrainConfig tc = cfg.local;
      tc.seed = seed;
      auto bundles = std::make_shared<std::vector<ensemble::ModelBundle>>();
      std::vector<data::SiloDataset> raw_tests;
      for (const auto& p : prepared) {
        double eps = 0.0;
        bundles->push_back(
            ensemble::train_local(p.train, p.val, spec, tc, dp_spec, p.stats, &eps));
        if (dp_spec != nullptr) result.epsilon_final[p.train.silo_id] = eps;
        raw_tests.push_back(p.raw_test);
      }
      result.per_silo_rmse =
          ensemble::evaluate_ensemble(*bundles, spec, raw_tests, cfg.weighting);
      if (cfg.write_checkpoints) result.bundles = std::move(bundles);
      break;
    }

    case Regime::federated:
    case Regime::federated_ldp: {
      fed::FedConfig fc = cfg.federation;
      fc.seed = seed;
      if (dp_spec != nullptr)
        warn_on_privacy_regime(cfg, fc.batch_size, prepared, warnings);
      std::vector<data::SiloDataset> train_silos, val_silos;
      for (const auto& p : prepared) {
        train_silos.push_back(p.train);
        val_silos.push_back(p.val);
      }
      fed::FederationResult fr =
          fed::run_federation(train_silos, val_silos, spec, fc, dp_spec);
      for (const auto& p : prepared)
        result.per_silo_rmse[p.test.silo_id] =
            fed::evaluate(spec, fr.global, fr.per_silo_bn, p.test, fc.aggregation)
                .rmse;
      if (dp_spec != nullptr)
        for (const auto& rec : fr.history)
          for (const auto& [id, eps] : rec.epsilon_spent)
            result.epsilon_final[id] = eps;
      result.history = std::move(fr.history);
      if (cfg.write_checkpoints)
        result.final_global = std::make_shared<ParameterSet>(std::move(fr.global));
      break;
    }
  }

  std::vector<double> rmses;
  for (const auto& [id, v] : result.per_silo_rmse) rmses.push_back(v);
  result.mean_rmse = mean_of(rmses);
  result.warnings.assign(warnings.begin(), warnings.end());
}

// Launches min(threads, jobs) workers over an atomic job index. Each job
// writes only its own slot, so the output order never depends on timing.
void run_pool(std::size_t jobs, int threads,
              const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(jobs, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs) return;
        body(i);
      }
    });
  for (auto& t : pool) t.join();
}

// Datasets keyed by seed. CSV sources load once and share; synthetic sources
// regenerate per seed so every seed is an independent draw.
std::map<std::uint64_t, std::shared_ptr<const std::vector<data::SiloDataset>>>
load_datasets(const config::ParsedConfig& cfg, std::set<std::string>& warnings) {
  std::map<std::uint64_t, std::shared_ptr<const std::vector<data::SiloDataset>>> out;
  if (cfg.source == config::ParsedConfig::Source::csv) {
    data::LoadReport lr;
    auto shared = std::make_shared<const std::vector<data::SiloDataset>>(
        data::load_csv(cfg.csv_path, cfg.csv_schema, &lr));
    if (lr.dropped_rows > 0)
      warnings.insert("csv: dropped " + std::to_string(lr.dropped_rows) +
                      " malformed row(s) from " + cfg.csv_path);
    for (std::uint64_t seed : cfg.seeds) out[seed] = shared;
  } else {
    for (std::uint64_t seed : cfg.seeds)
      if (out.find(seed) == out.end())
        out[seed] = std::make_shared<const std::vector<data::SiloDataset>>(
            data::generate_silos(cfg.generator, seed));
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

std::string cell_tag(const CellKey& key) {
  return to_string(key.regime) + "_" + std::to_string(key.year) + "_" +
         std::to_string(key.seed);
}

}  // namespace

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::traditional_pooled: return "traditional_pooled";
    case Regime::local_only: return "local_only";
    case Regime::model_sharing: return "model_sharing";
    case Regime::model_sharing_ldp: return "model_sharing_ldp";
    case Regime::federated: return "federated";
    case Regime::federated_ldp: return "federated_ldp";
  }
  throw std::invalid_argument("unknown regime value");
}

Regime regime_from_string(const std::string& name) {
  if (name == "traditional_pooled") return Regime::traditional_pooled;
  if (name == "local_only") return Regime::local_only;
  if (name == "model_sharing") return Regime::model_sharing;
  if (name == "model_sharing_ldp") return Regime::model_sharing_ldp;
  if (name == "federated") return Regime::federated;
  if (name == "federated_ldp") return Regime::federated_ldp;
  throw ConfigError("experiment.regimes", "unknown regime '" + name + "'");
}

double MatrixReport::regime_mean(Regime regime) const {
  std::vector<double> values;
  for (const auto& [key, cell] : cells)
    if (key.regime == regime && !cell.failed && std::isfinite(cell.mean_rmse))
      values.push_back(cell.mean_rmse);
  return mean_of(values);
}

CellResult run_cell(const config::ParsedConfig& cfg, Regime regime, int year,
                    std::uint64_t seed, const std::vector<data::SiloDataset>& silos) {
  CellResult result;
  try {
    run_cell_impl(cfg, regime, year, seed, silos, result);
  } catch (const std::exception& e) {
    result = CellResult{};
    result.failed = true;
    result.error = e.what();
    result.mean_rmse = kNaN;
  } catch (...) {
    result = CellResult{};
    result.failed = true;
    result.error = "unknown error";
    result.mean_rmse = kNaN;
  }
  return result;
}

MatrixReport run_matrix(const config::ParsedConfig& cfg, int threads) {
  const auto start = std::chrono::steady_clock::now();
  if (threads <= 0) threads = std::max(1, cfg.threads);

  MatrixReport report;
  report.config_hash = config::config_hash_hex(cfg);

  std::set<std::string> warnings;
  const auto datasets = load_datasets(cfg, warnings);

  std::vector<CellKey> keys;
  for (const auto& regime_name : cfg.regimes) {
    const Regime regime = regime_from_string(regime_name);
    for (int year : cfg.test_years)
      for (std::uint64_t seed : cfg.seeds) keys.push_back({regime, year, seed});
  }

  report.cells.resize(keys.size());
  run_pool(keys.size(), threads, [&](std::size_t i) {
    const CellKey& key = keys[i];
    report.cells[i] = {key, run_cell(cfg, key.regime, key.year, key.seed,
                                     *datasets.at(key.seed))};
  });

  for (const auto& [key, cell] : report.cells)
    for (const auto& w : cell.warnings) warnings.insert(w);
  report.warnings.assign(warnings.begin(), warnings.end());

  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

std::vector<SweepPoint> sweep_epsilon(const config::ParsedConfig& cfg, int threads) {
  if (threads <= 0) threads = std::max(1, cfg.threads);
  if (cfg.test_years.empty())
    throw ConfigError("experiment.test_years", "sweep needs a test year");
  if (cfg.sweep_budgets.empty())
    throw ConfigError("sweep.budgets", "sweep needs at least one budget");
  const int year = cfg.test_years.front();

  std::set<std::string> warnings;
  const auto datasets = load_datasets(cfg, warnings);

  struct Job {
    double budget = 0.0;
    std::uint64_t seed = 0;
  };
  std::vector<Job> jobs;
  for (double budget : cfg.sweep_budgets)
    for (std::uint64_t seed : cfg.seeds) jobs.push_back({budget, seed});

  std::vector<double> cell_rmse(jobs.size(), kNaN);
  run_pool(jobs.size(), threads, [&](std::size_t i) {
    config::ParsedConfig local = cfg;
    local.privacy.epsilon_budget = jobs[i].budget;
    const CellResult cell = run_cell(local, Regime::federated_ldp, year,
                                     jobs[i].seed, *datasets.at(jobs[i].seed));
    if (!cell.failed) cell_rmse[i] = cell.mean_rmse;
  });

  std::vector<SweepPoint> curve;
  const std::size_t per_budget = cfg.seeds.size();
  for (std::size_t b = 0; b < cfg.sweep_budgets.size(); ++b) {
    std::vector<double> values;
    for (std::size_t s = 0; s < per_budget; ++s) {
      const double v = cell_rmse[b * per_budget + s];
      if (std::isfinite(v)) values.push_back(v);
    }
    SweepPoint point;
    point.budget = cfg.sweep_budgets[b];
    point.median_rmse = median_of(values);
    point.mean_rmse = mean_of(values);
    curve.push_back(point);
  }
  return curve;
}

void write_outputs(const MatrixReport& report, const config::ParsedConfig& cfg,
                   const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  {
    std::ostringstream csv;
    csv << "regime,year,seed,silo,rmse,epsilon,status\n";
    for (const auto& [key, cell] : report.cells) {
      const std::string prefix = to_string(key.regime) + "," +
                                 std::to_string(key.year) + "," +
                                 std::to_string(key.seed) + ",";
      if (cell.failed) {
        csv << prefix << "*,nan,nan,failed\n";
        continue;
      }
      for (const auto& [silo, rmse] : cell.per_silo_rmse) {
        const auto it = cell.epsilon_final.find(silo);
        const double eps = it == cell.epsilon_final.end() ? 0.0 : it->second;
        csv << prefix << silo << "," << fmt6(rmse) << "," << fmt6(eps) << ",ok\n";
      }
    }
    write_text_file(out_dir + "/report.csv", csv.str());
  }

  {
    std::ostringstream txt;
    txt << "experiment: " << cfg.name << "\n";
    txt << "config_hash: " << report.config_hash << "\n";
    std::size_t failed = 0;
    for (const auto& [key, cell] : report.cells) failed += cell.failed ? 1 : 0;
    txt << "cells: " << report.cells.size() << " (" << failed << " failed)\n\n";

    txt << "mean rmse by regime (over non-failed cells):\n";
    std::set<std::string> seen;
    for (const auto& regime_name : cfg.regimes) {
      if (!seen.insert(regime_name).second) continue;
      const double v = report.regime_mean(regime_from_string(regime_name));
      txt << "  " << regime_name << ": " << fmt6(v) << "\n";
    }

    bool any_failed = false;
    for (const auto& [key, cell] : report.cells) {
      if (!cell.failed) continue;
      if (!any_failed) txt << "\nfailed cells:\n";
      any_failed = true;
      txt << "  " << cell_tag(key) << ": " << cell.error << "\n";
    }

    if (!report.warnings.empty()) {
      txt << "\nwarnings:\n";
      for (const auto& w : report.warnings) txt << "  " << w << "\n";
    }

    txt << "\nwall_clock_seconds: " << fmt6(report.wall_clock_seconds) << "\n";
    write_text_file(out_dir + "/summary.txt", txt.str());
  }

  if (cfg.write_history) {
    const std::string hist_dir = out_dir + "/history";
    fs::create_directories(hist_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + hist_dir);
    for (const auto& [key, cell] : report.cells) {
      if (cell.failed || cell.history.empty()) continue;
      std::ostringstream csv;
      csv << "round,silo,train_loss,epsilon,val_loss\n";
      for (const auto& rec : cell.history)
        for (const auto& silo : rec.selected) {
          const auto lit = rec.train_loss.find(silo);
          const auto eit = rec.epsilon_spent.find(silo);
          csv << rec.round << "," << silo << ","
              << fmt6(lit == rec.train_loss.end() ? kNaN : lit->second) << ","
              << fmt6(eit == rec.epsilon_spent.end() ? 0.0 : eit->second) << ","
              << fmt6(rec.val_loss) << "\n";
        }
      write_text_file(hist_dir + "/" + cell_tag(key) + ".csv", csv.str());
    }
  }

  if (cfg.write_checkpoints) {
    const std::string ckpt_dir = out_dir + "/checkpoints";
    fs::create_directories(ckpt_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + ckpt_dir);
    for (const auto& [key, cell] : report.cells) {
      if (cell.failed) continue;
      if (cell.final_global)
        save_checkpoint(ckpt_dir + "/" + cell_tag(key) + ".ckpt", *cell.final_global);
      if (cell.bundles)
        ensemble::write_ensemble_manifest(ckpt_dir + "/" + cell_tag(key),
                                          *cell.bundles, report.config_hash);
    }
  }
}

void write_sweep_csv(const std::vector<SweepPoint>& curve,
                     const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const std::string dir = out_dir + "/curves";
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
  std::ostringstream csv;
  csv << "epsilon_budget,median_rmse,mean_rmse\n";
  for (const auto& point : curve)
    csv << fmt6(point.budget) << "," << fmt6(point.median_rmse) << ","
        << fmt6(point.mean_rmse) << "\n";
  write_text_file(dir + "/epsilon.csv", csv.str());
}

namespace {

// Ranks with ties averaged, 1-based.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("spearman: length mismatch");
  if (a.size() < 2) return kNaN;
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double ma = mean_of(ra), mb = mean_of(rb);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return kNaN;
  return cov / std::sqrt(va * vb);
}

}  // namespace agrifed::harness
