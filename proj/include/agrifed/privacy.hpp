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

#ifndef AGRIFED_PRIVACY_HPP_
#define AGRIFED_PRIVACY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agrifed/rng.hpp"
#include "agrifed/tensor.hpp"

namespace agrifed::dp {

struct PrivacySpec {
  double clip_norm = 10.0;        // S; may be +inf only when sigma is 0
  double noise_multiplier = 1.4;  // sigma; noise stddev = sigma * S
  double delta = 1e-5;
  double epsilon_budget = 8.0;    // +inf means never exhausted
  void validate() const;
};

// Per-silo accounting for the subsampled Gaussian mechanism. The epsilon
// bound is min over alpha in alpha_grid of
//   steps * alpha * q^2 / sigma^2 + ln(1/delta) / (alpha - 1),
// a simplified Renyi composition bound valid as an approximation for small
// sampling rate q and sigma >= 1. The grid is a field so callers can trade
// precision for speed.
struct AccountantState {
  long long steps = 0;
  double sampling_rate = 0.0;  // q = B / n_k, in (0, 1]
  double sigma = 0.0;
  std::vector<double> alpha_grid;

  void validate() const;
};

// Grid used when AccountantState.alpha_grid is left empty.
const std::vector<double>& default_alpha_grid();

AccountantState make_accountant(double sampling_rate, double sigma);

// Scale all trainable entries uniformly so the concatenated global L2 norm
// is at most S. Inputs within the bound pass through unchanged.
GradientSet clip(const GradientSet& gradient, double clip_norm);

// The local randomizer: clip each per-example gradient, sum, add Gaussian
// noise with per-coordinate stddev sigma * S, divide by the example count.
GradientSet privatize(const std::vector<GradientSet>& per_example,
                      const PrivacySpec& spec, rng::Engine& noise_engine);

AccountantState account_step(AccountantState state);

// Epsilon spent after `state.steps` releases at failure mass delta.
// Zero steps cost zero; sigma = 0 with steps > 0 is infinitely revealing.
double epsilon(const AccountantState& state, double delta);

bool budget_exhausted(const AccountantState& state, const PrivacySpec& spec);

// Non-empty when (q, sigma) fall outside the bound's comfort zone.
std::optional<std::string> regime_warning(const AccountantState& state);

}  // namespace agrifed::dp

#endif  // AGRIFED_PRIVACY_HPP_
