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

#include "agrifed/privacy.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace agrifed::dp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void PrivacySpec::validate() const {
  if (!(clip_norm > 0.0)) throw std::invalid_argument("privacy: clip_norm must be > 0");
  if (noise_multiplier < 0.0)
    throw std::invalid_argument("privacy: noise_multiplier must be >= 0");
  if (noise_multiplier > 0.0 && std::isinf(clip_norm))
    throw std::invalid_argument(
        "privacy: infinite clip_norm requires noise_multiplier 0");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("privacy: delta must be in (0, 1)");
  if (!(epsilon_budget > 0.0))
    throw std::invalid_argument("privacy: epsilon_budget must be > 0");
}

void AccountantState::validate() const {
  if (steps < 0) throw std::invalid_argument("accountant: negative step count");
  if (!(sampling_rate > 0.0 && sampling_rate <= 1.0))
    throw std::invalid_argument("accountant: sampling rate must be in (0, 1]");
  if (sigma < 0.0) throw std::invalid_argument("accountant: sigma must be >= 0");
  for (double a : alpha_grid)
    if (!(a > 1.0))
      throw std::invalid_argument("accountant: alpha orders must be > 1");
}

const std::vector<double>& default_alpha_grid() {
  static const std::vector<double> grid = {1.25, 1.5, 2.0,  3.0, 4.0,
                                           8.0,  16.0, 32.0, 64.0};
  return grid;
}

AccountantState make_accountant(double sampling_rate, double sigma) {
  AccountantState state;
  state.sampling_rate = sampling_rate;
  state.sigma = sigma;
  state.alpha_grid = default_alpha_grid();
  state.validate();
  return state;
}

GradientSet clip(const GradientSet& gradient, double clip_norm) {
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip: norm bound must be > 0");
  const double norm = l2_norm(gradient);
  if (norm <= clip_norm) return gradient;
  GradientSet out = gradient;
  scale_inplace(out, clip_norm / norm);
  return out;
}

GradientSet privatize(const std::vector<GradientSet>& per_example,
                      const PrivacySpec& spec, rng::Engine& noise_engine) {
  if (per_example.empty()) throw std::invalid_argument("privatize: empty batch");
  spec.validate();

  GradientSet sum = zeros_like(per_example.front());
  for (const auto& g : per_example) axpy(sum, clip(g, spec.clip_norm), 1.0);

  if (spec.noise_multiplier > 0.0) {
    const double stddev = spec.noise_multiplier * spec.clip_norm;
    std::normal_distribution<double> noise(0.0, stddev);
    for (auto& e : sum.entries)
      for (double& v : e.values) v += noise(noise_engine);
  }

  scale_inplace(sum, 1.0 / static_cast<double>(per_example.size()));
  return sum;
}

AccountantState account_step(AccountantState state) {
  state.validate();
  ++state.steps;
  return state;
}

double epsilon(const AccountantState& state, double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("epsilon: delta must be in (0, 1)");
  state.validate();
  if (state.steps == 0) return 0.0;
  if (state.sigma == 0.0) return kInf;

  const std::vector<double>& grid =
      state.alpha_grid.empty() ? default_alpha_grid() : state.alpha_grid;
  const double t = static_cast<double>(state.steps);
  const double q2_over_s2 =
      state.sampling_rate * state.sampling_rate / (state.sigma * state.sigma);
  const double log_inv_delta = std::log(1.0 / delta);

  double best = kInf;
  for (double alpha : grid) {
    const double eps = t * alpha * q2_over_s2 + log_inv_delta / (alpha - 1.0);
    best = std::min(best, eps);
  }
  return best;
}

bool budget_exhausted(const AccountantState& state, const PrivacySpec& spec) {
  spec.validate();
  // An infinite budget can never be spent, even by the sigma = 0 sentinel.
  if (std::isinf(spec.epsilon_budget)) return false;
  return epsilon(state, spec.delta) >= spec.epsilon_budget;
}

std::optional<std::string> regime_warning(const AccountantState& state) {
  if (state.sigma > 0.0 && state.sigma < 1.0)
    return "accountant bound assumes sigma >= 1; sigma = " +
           std::to_string(state.sigma);
  if (state.sampling_rate > 0.1)
    return "accountant bound assumes small sampling rate; q = " +
           std::to_string(state.sampling_rate);
  return std::nullopt;
}

}  // namespace agrifed::dp
