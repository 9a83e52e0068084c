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

#include "agrifed/federation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "agrifed/rng.hpp"

namespace agrifed::fed {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool model_has_bn(const nn::ModelSpec& spec) {
  for (const auto& l : spec.hidden)
    if (l.use_bn) return true;
  return false;
}

nn::Batch make_batch(const data::SiloDataset& ds,
                     const std::vector<Eigen::Index>& order, std::size_t begin,
                     std::size_t end) {
  nn::Batch b;
  const auto n = static_cast<Eigen::Index>(end - begin);
  b.features.resize(n, ds.features.cols());
  b.targets.resize(n);
  for (std::size_t i = begin; i < end; ++i) {
    b.features.row(static_cast<Eigen::Index>(i - begin)) =
        ds.features.row(order[i]);
    b.targets[static_cast<Eigen::Index>(i - begin)] = ds.targets[order[i]];
  }
  return b;
}

}  // namespace

double LrSchedule::at(long long cumulative_epoch) const {
  double rate = base;
  for (long long p : decay_points)
    if (cumulative_epoch >= p) rate *= factor;
  return rate;
}

void LrSchedule::validate() const {
  if (!(base > 0.0)) throw std::invalid_argument("lr schedule: base must be > 0");
  if (!(factor > 0.0 && factor < 1.0))
    throw std::invalid_argument("lr schedule: decay factor must be in (0, 1)");
  for (std::size_t i = 1; i < decay_points.size(); ++i)
    if (decay_points[i] <= decay_points[i - 1])
      throw std::invalid_argument("lr schedule: decay points must be strictly increasing");
}

void FedConfig::validate() const {
  if (rounds < 0) throw std::invalid_argument("federation: rounds must be >= 0");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("federation: fraction must be in (0, 1]");
  if (local_epochs < 1)
    throw std::invalid_argument("federation: local_epochs must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("federation: batch_size must be >= 1");
  if (early_stopping.patience < 0)
    throw std::invalid_argument("federation: patience must be >= 0");
  lr.validate();
}

std::vector<std::string> select_silos(const std::vector<std::string>& all,
                                      double fraction, long long round,
                                      std::uint64_t seed) {
  if (all.empty()) throw std::invalid_argument("select_silos: empty silo list");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("select_silos: fraction must be in (0, 1]");

  std::vector<std::string> pool = all;
  std::sort(pool.begin(), pool.end());
  const auto k = pool.size();
  const auto m = std::max<std::size_t>(
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(k))), 1);
  if (m >= k) return pool;

  // Partial Fisher-Yates over the canonical ordering, then restore canonical
  // order within the selection.
  auto eng = rng::engine(rng::derive(seed, rng::Stream::select,
                                     static_cast<std::uint64_t>(round)));
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, k - 1);
    std::swap(pool[i], pool[pick(eng)]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

SiloUpdateResult silo_update(const ParameterSet& global, const nn::ModelSpec& spec,
                             const data::SiloDataset& train, const FedConfig& cfg,
                             const dp::PrivacySpec* dp_spec,
                             dp::AccountantState* accountant, long long round) {
  cfg.validate();
  if (dp_spec != nullptr && accountant == nullptr)
    throw std::invalid_argument("silo_update: DP run needs an accountant");

  SiloUpdateResult result;
  result.local = global;
  const Eigen::Index n = train.size();
  if (n == 0) {
    result.train_loss = kNaN;
    return result;
  }
  if (model_has_bn(spec) && n < 2)
    throw std::invalid_argument("silo_update: silo '" + train.silo_id +
                                "' has fewer than 2 train rows but the model uses "
                                "batch norm");

  const std::uint64_t silo_key = rng::fnv1a(train.silo_id);
  const auto batch_size = static_cast<std::size_t>(
      std::min<long long>(cfg.batch_size, static_cast<long long>(n)));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  double final_epoch_loss = kNaN;
  bool any_batch = false;
  for (long long e = 0; e < cfg.local_epochs; ++e) {
    const long long cumulative_epoch = round * cfg.local_epochs + e;
    const double lr = cfg.lr.at(cumulative_epoch);
    auto shuffle_eng = rng::engine(
        rng::derive(cfg.seed, rng::Stream::shuffle, silo_key,
                    static_cast<std::uint64_t>(cumulative_epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_eng);

    const bool last_epoch = (e == cfg.local_epochs - 1);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(start + batch_size, order.size());
      nn::Batch batch = make_batch(train, order, start, stop);

      double batch_loss;
      if (dp_spec == nullptr) {
        nn::ForwardCache cache = nn::forward_train(spec, result.local, batch);
        batch_loss = nn::loss_mse(cache.predictions, batch.targets);
        GradientSet grads = nn::backward(spec, result.local, cache, batch.targets);
        nn::sgd_step(result.local, grads, lr);
      } else {
        if (dp::budget_exhausted(*accountant, *dp_spec)) {
          result.budget_stopped = true;
          result.train_loss = any_batch ? final_epoch_loss : kNaN;
          return result;
        }
        nn::ForwardCache cache =
            nn::forward_frozen(spec, result.local, batch.features);
        batch_loss = nn::loss_mse(cache.predictions, batch.targets);
        std::vector<GradientSet> per_ex =
            nn::per_example_gradients(spec, result.local, batch);
        auto noise_eng = rng::engine(
            rng::derive(cfg.seed, rng::Stream::noise, silo_key,
                        static_cast<std::uint64_t>(accountant->steps)));
        GradientSet noisy = dp::privatize(per_ex, *dp_spec, noise_eng);
        nn::sgd_step(result.local, noisy, lr);
        *accountant = dp::account_step(*accountant);
        ++result.dp_steps;
        // Keep running statistics meaningful for eval-mode forwards: the
        // privatized step itself never touches them.
        if (model_has_bn(spec))
          nn::update_running_stats(spec, result.local, batch.features);
      }

      if (!std::isfinite(batch_loss))
        throw std::runtime_error(
            "silo_update: non-finite loss on silo '" + train.silo_id +
            "' at round " + std::to_string(round) + " epoch " + std::to_string(e));

      any_batch = true;
      if (last_epoch)
        epoch_loss += batch_loss * static_cast<double>(stop - start) /
                      static_cast<double>(n);
    }
    if (last_epoch) final_epoch_loss = epoch_loss;
  }
  result.train_loss = final_epoch_loss;
  return result;
}

ParameterSet aggregate(
    const std::vector<std::pair<ParameterSet, long long>>& locals,
    Aggregation mode, const ParameterSet& previous_global) {
  if (locals.empty()) return previous_global;

  long long total = 0;
  for (const auto& [params, n_k] : locals) {
    if (n_k < 1) throw std::invalid_argument("aggregate: silo weight must be >= 1");
    if (!same_structure(params, previous_global))
      throw std::invalid_argument("aggregate: parameter structure mismatch");
    total += n_k;
  }

  // Both modes produce the same weighted mean here; fedbn differs in what the
  // caller broadcasts and stores per silo, not in this reduction. BN entries
  // of the fedbn output serve as the fallback for silos without local state.
  (void)mode;
  ParameterSet out = previous_global;
  for (std::size_t e = 0; e < out.entries.size(); ++e) {
    std::vector<double>& acc = out.entries[e].values;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& [params, n_k] : locals) {
      const double w = static_cast<double>(n_k) / static_cast<double>(total);
      const std::vector<double>& src = params.entries[e].values;
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += w * src[j];
    }
  }
  return out;
}

FederationResult run_federation(const std::vector<data::SiloDataset>& train_silos,
                                const std::vector<data::SiloDataset>& val_silos,
                                const nn::ModelSpec& spec, const FedConfig& cfg,
                                const dp::PrivacySpec* dp_spec) {
  cfg.validate();
  spec.validate();
  if (train_silos.empty())
    throw std::invalid_argument("run_federation: no silos");
  if (dp_spec != nullptr) dp_spec->validate();

  // Canonical silo order drives every reduction.
  std::vector<const data::SiloDataset*> silos;
  for (const auto& s : train_silos) silos.push_back(&s);
  std::sort(silos.begin(), silos.end(),
            [](const auto* a, const auto* b) { return a->silo_id < b->silo_id; });
  for (std::size_t i = 1; i < silos.size(); ++i)
    if (silos[i]->silo_id == silos[i - 1]->silo_id)
      throw std::invalid_argument("run_federation: duplicate silo id '" +
                                  silos[i]->silo_id + "'");
  for (const auto* s : silos)
    if (s->feature_dim() != spec.input_dim)
      throw std::invalid_argument("run_federation: silo '" + s->silo_id +
                                  "' feature dim does not match the model");

  // Pooled validation set, concatenated in canonical order.
  Eigen::Index val_rows = 0;
  for (const auto& v : val_silos) val_rows += v.size();
  Eigen::MatrixXd val_x(val_rows, spec.input_dim);
  Eigen::VectorXd val_y(val_rows);
  {
    std::vector<const data::SiloDataset*> vs;
    for (const auto& v : val_silos) vs.push_back(&v);
    std::sort(vs.begin(), vs.end(),
              [](const auto* a, const auto* b) { return a->silo_id < b->silo_id; });
    Eigen::Index at = 0;
    for (const auto* v : vs) {
      val_x.middleRows(at, v->size()) = v->features;
      val_y.segment(at, v->size()) = v->targets;
      at += v->size();
    }
  }

  FederationResult result;
  result.global = nn::init_model(spec, cfg.seed);

  std::map<std::string, dp::AccountantState> accountants;
  if (dp_spec != nullptr)
    for (const auto* s : silos) {
      const double q = std::min(
          1.0, static_cast<double>(cfg.batch_size) /
                   std::max<double>(1.0, static_cast<double>(s->size())));
      accountants.emplace(s->silo_id,
                          dp::make_accountant(q, dp_spec->noise_multiplier));
    }

  double best_val = std::numeric_limits<double>::infinity();
  ParameterSet best_global = result.global;
  std::map<std::string, std::vector<NamedTensor>> best_bn;
  bool have_best = false;
  int rounds_without_improvement = 0;

  for (long long t = 0; t < cfg.rounds; ++t) {
    // Budget-spent silos stop participating before selection.
    std::vector<std::string> active;
    for (const auto* s : silos) {
      if (dp_spec != nullptr &&
          dp::budget_exhausted(accountants.at(s->silo_id), *dp_spec))
        continue;
      active.push_back(s->silo_id);
    }
    if (active.empty()) {
      result.budget_exhausted_all = true;
      break;
    }

    const std::vector<std::string> selected =
        select_silos(active, cfg.fraction, t, cfg.seed);

    RoundRecord record;
    record.round = t;
    record.selected = selected;

    std::vector<std::pair<ParameterSet, long long>> locals;
    for (const std::string& id : selected) {
      const auto it = std::find_if(silos.begin(), silos.end(),
                                   [&](const auto* s) { return s->silo_id == id; });
      const data::SiloDataset& ds = **it;

      ParameterSet start = result.global;
      if (cfg.aggregation == Aggregation::fedbn) {
        const auto bn_it = result.per_silo_bn.find(id);
        if (bn_it != result.per_silo_bn.end())
          splice_bn_entries(start, bn_it->second);
      }

      dp::AccountantState* acct =
          dp_spec != nullptr ? &accountants.at(id) : nullptr;
      SiloUpdateResult up = silo_update(start, spec, ds, cfg, dp_spec, acct, t);

      record.train_loss[id] = up.train_loss;
      record.epsilon_spent[id] =
          dp_spec != nullptr ? dp::epsilon(*acct, dp_spec->delta) : 0.0;
      locals.emplace_back(std::move(up.local), ds.size());

      if (cfg.aggregation == Aggregation::fedbn)
        result.per_silo_bn[id] = extract_bn_entries(locals.back().first);
    }

    result.global = aggregate(locals, cfg.aggregation, result.global);
    result.rounds_run = t + 1;

    record.val_loss =
        val_rows > 0
            ? nn::loss_mse(nn::forward_eval(spec, result.global, val_x), val_y)
            : kNaN;
    result.history.push_back(record);

    if (cfg.early_stopping.enabled && std::isfinite(record.val_loss)) {
      if (record.val_loss < best_val) {
        best_val = record.val_loss;
        best_global = result.global;
        best_bn = result.per_silo_bn;
        have_best = true;
        rounds_without_improvement = 0;
      } else {
        ++rounds_without_improvement;
        if (rounds_without_improvement >= cfg.early_stopping.patience) {
          result.stopped_early = true;
          break;
        }
      }
    }
  }

  if (cfg.early_stopping.enabled && have_best) {
    result.global = std::move(best_global);
    result.per_silo_bn = std::move(best_bn);
  }
  return result;
}

EvalResult evaluate(const nn::ModelSpec& spec, const ParameterSet& global,
                    const std::map<std::string, std::vector<NamedTensor>>& per_silo_bn,
                    const data::SiloDataset& test, Aggregation mode) {
  if (test.size() < 1)
    throw std::invalid_argument("evaluate: empty test split for silo '" +
                                test.silo_id + "'");
  EvalResult out;
  ParameterSet params = global;
  if (mode == Aggregation::fedbn && model_has_bn(spec)) {
    const auto it = per_silo_bn.find(test.silo_id);
    if (it != per_silo_bn.end())
      splice_bn_entries(params, it->second);
    else
      out.used_fallback_bn = true;
  }
  const Eigen::VectorXd preds = nn::forward_eval(spec, params, test.features);
  out.rmse = std::sqrt(nn::loss_mse(preds, test.targets));
  return out;
}

}  // namespace agrifed::fed
