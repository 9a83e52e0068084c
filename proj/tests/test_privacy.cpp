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

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "agrifed/privacy.hpp"
#include "agrifed/rng.hpp"
#include "agrifed/tensor.hpp"

using namespace agrifed;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

GradientSet grad(std::initializer_list<std::vector<double>> entries) {
  GradientSet g;
  int k = 0;
  for (const auto& values : entries) {
    NamedTensor t;
    t.name = "e" + std::to_string(k++);
    t.shape = {values.size()};
    t.values = values;
    g.entries.push_back(std::move(t));
  }
  return g;
}

bool values_equal(const GradientSet& a, const GradientSet& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    if (a.entries[i].values != b.entries[i].values) return false;
  return true;
}

// Independent recomputation of the accountant bound.
double epsilon_oracle(long long steps, double q, double sigma, double delta,
                      const std::vector<double>& alphas) {
  double best = kInf;
  for (double alpha : alphas) {
    const double rdp = static_cast<double>(steps) * alpha * q * q / (sigma * sigma);
    best = std::min(best, rdp + std::log(1.0 / delta) / (alpha - 1.0));
  }
  return best;
}

std::vector<double> dense_grid() {
  std::vector<double> grid;
  for (double a = 1.01; a <= 256.0; a += 0.01) grid.push_back(a);
  return grid;
}

}  // namespace

TEST_CASE("clip rescales onto the norm ball") {
  const GradientSet g = grad({{12.0, 16.0}});  // norm 20
  const GradientSet c = dp::clip(g, 12.0);
  CHECK(c.entries[0].values[0] == doctest::Approx(7.2).epsilon(1e-12));
  CHECK(c.entries[0].values[1] == doctest::Approx(9.6).epsilon(1e-12));
  CHECK(l2_norm(c) == doctest::Approx(12.0).epsilon(1e-12));

  // The norm spans entries, not each entry separately.
  const GradientSet two = grad({{3.0}, {4.0}});  // norm 5
  const GradientSet ct = dp::clip(two, 1.0);
  CHECK(ct.entries[0].values[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(ct.entries[1].values[0] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("clip passes small and infinite-bound gradients through untouched") {
  const GradientSet g = grad({{0.1, -0.2}, {0.05}});
  CHECK(values_equal(dp::clip(g, 1.0), g));

  const GradientSet huge = grad({{1e12, -3e15}});
  CHECK(values_equal(dp::clip(huge, kInf), huge));

  for (double q : {1.0, 0.1, 25.0}) {
    const GradientSet c = dp::clip(huge, q);
    CHECK(l2_norm(c) == doctest::Approx(std::min(l2_norm(huge), q)).epsilon(1e-12));
  }

  CHECK_THROWS_AS((void)dp::clip(g, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)dp::clip(g, -1.0), std::invalid_argument);
}

TEST_CASE("privatize without noise is the mean of clipped gradients") {
  dp::PrivacySpec spec;
  spec.clip_norm = 12.0;
  spec.noise_multiplier = 0.0;
  auto eng = rng::engine(7);

  // Single example over the bound: exactly its clipped version.
  const GradientSet big = grad({{12.0, 16.0}});
  const GradientSet one = dp::privatize({big}, spec, eng);
  CHECK(one.entries[0].values[0] == doctest::Approx(7.2).epsilon(1e-12));
  CHECK(one.entries[0].values[1] == doctest::Approx(9.6).epsilon(1e-12));

  // In-bound batch: the plain mean.
  const GradientSet a = grad({{1.0, 2.0}});
  const GradientSet b = grad({{3.0, -4.0}});
  const GradientSet m = dp::privatize({a, b}, spec, eng);
  CHECK(m.entries[0].values[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(m.entries[0].values[1] == doctest::Approx(-1.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)dp::privatize({}, spec, eng), std::invalid_argument);
}

TEST_CASE("privatize noise has stddev sigma * clip / batch_size per coordinate") {
  dp::PrivacySpec spec;
  spec.clip_norm = 2.0;
  spec.noise_multiplier = 1.2;
  const int n = 4;
  const std::vector<GradientSet> batch(n, grad({{0.5, -0.5}}));
  const double expected_sd = spec.noise_multiplier * spec.clip_norm / n;  // 0.6

  auto eng = rng::engine(123);
  const int trials = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    const GradientSet out = dp::privatize(batch, spec, eng);
    for (int j = 0; j < 2; ++j) {
      const double centered = out.entries[0].values[j] - (j == 0 ? 0.5 : -0.5);
      sum += centered;
      sum_sq += centered * centered;
    }
  }
  const double count = 2.0 * trials;
  const double mean = sum / count;
  const double sd = std::sqrt(sum_sq / count - mean * mean);
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sd - expected_sd) / expected_sd < 0.02);
}

TEST_CASE("account_step increments and preserves the rest") {
  dp::AccountantState s = dp::make_accountant(0.05, 1.4);
  CHECK(s.steps == 0);
  CHECK(s.alpha_grid == dp::default_alpha_grid());
  s = dp::account_step(s);
  s = dp::account_step(s);
  s = dp::account_step(s);
  CHECK(s.steps == 3);
  CHECK(s.sampling_rate == 0.05);
  CHECK(s.sigma == 1.4);

  CHECK_THROWS_AS((void)dp::make_accountant(0.0, 1.4), std::invalid_argument);
  CHECK_THROWS_AS((void)dp::make_accountant(1.5, 1.4), std::invalid_argument);
}

TEST_CASE("epsilon edge cases") {
  dp::AccountantState s = dp::make_accountant(0.05, 1.4);
  CHECK(dp::epsilon(s, 1e-5) == 0.0);

  dp::AccountantState noiseless = dp::make_accountant(0.05, 0.0);
  noiseless.steps = 1;
  CHECK(std::isinf(dp::epsilon(noiseless, 1e-5)));
  noiseless.steps = 0;
  CHECK(dp::epsilon(noiseless, 1e-5) == 0.0);

  s.steps = 10;
  CHECK_THROWS_AS((void)dp::epsilon(s, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)dp::epsilon(s, 1.0), std::invalid_argument);
  CHECK_THROWS_AS((void)dp::epsilon(s, -0.1), std::invalid_argument);

  dp::AccountantState bad = s;
  bad.alpha_grid = {0.5};
  CHECK_THROWS_AS((void)dp::epsilon(bad, 1e-5), std::invalid_argument);
}

TEST_CASE("epsilon matches an independent recomputation on random regimes") {
  std::mt19937_64 eng(2024);
  std::uniform_real_distribution<double> uq(0.001, 0.2);
  std::uniform_real_distribution<double> us(0.8, 3.0);
  std::uniform_real_distribution<double> uld(std::log(1e-7), std::log(1e-3));
  std::uniform_int_distribution<long long> ut(1, 20000);

  const std::vector<double> dense = dense_grid();
  for (int i = 0; i < 50; ++i) {
    const double q = uq(eng), sigma = us(eng), delta = std::exp(uld(eng));
    const long long steps = ut(eng);

    dp::AccountantState s = dp::make_accountant(q, sigma);
    s.steps = steps;
    CHECK(dp::epsilon(s, delta) ==
          doctest::Approx(epsilon_oracle(steps, q, sigma, delta,
                                         dp::default_alpha_grid()))
              .epsilon(1e-12));

    s.alpha_grid = dense;
    CHECK(dp::epsilon(s, delta) ==
          doctest::Approx(epsilon_oracle(steps, q, sigma, delta, dense))
              .epsilon(1e-12));

    // The dense grid can only improve (lower) the bound.
    CHECK(dp::epsilon(s, delta) <=
          epsilon_oracle(steps, q, sigma, delta, dp::default_alpha_grid()) +
              1e-12);
  }
}

TEST_CASE("epsilon grows strictly with steps and shrinks with sigma") {
  dp::AccountantState s = dp::make_accountant(0.02, 1.4);
  double prev = 0.0;
  for (long long t : {1LL, 10LL, 100LL, 1000LL, 10000LL}) {
    s.steps = t;
    const double e = dp::epsilon(s, 1e-5);
    CHECK(e > prev);
    prev = e;
  }

  dp::AccountantState weak = dp::make_accountant(0.02, 1.0);
  dp::AccountantState strong = dp::make_accountant(0.02, 2.5);
  weak.steps = strong.steps = 5000;
  CHECK(dp::epsilon(strong, 1e-5) < dp::epsilon(weak, 1e-5));
}

TEST_CASE("budget_exhausted flips exactly where the direct scan says") {
  dp::PrivacySpec spec;
  spec.clip_norm = 5.0;
  spec.noise_multiplier = 1.2;
  spec.delta = 1e-5;
  spec.epsilon_budget = 3.0;

  const double q = 0.05;
  long long first = -1;
  for (long long t = 1; t <= 5000; ++t) {
    if (epsilon_oracle(t, q, spec.noise_multiplier, spec.delta,
                       dp::default_alpha_grid()) >= spec.epsilon_budget) {
      first = t;
      break;
    }
  }
  REQUIRE(first > 1);

  dp::AccountantState s = dp::make_accountant(q, spec.noise_multiplier);
  CHECK_FALSE(dp::budget_exhausted(s, spec));
  bool flipped = false;
  for (long long t = 1; t <= first + 50; ++t) {
    s = dp::account_step(s);
    const bool exhausted = dp::budget_exhausted(s, spec);
    if (!flipped) {
      CHECK(exhausted == (t >= first));
      flipped = exhausted;
    } else {
      CHECK(exhausted);  // never un-exhausts
    }
  }
}

TEST_CASE("infinite budget is never exhausted, even noiseless") {
  dp::PrivacySpec spec;
  spec.clip_norm = 5.0;
  spec.noise_multiplier = 0.0;
  spec.epsilon_budget = kInf;

  dp::AccountantState s = dp::make_accountant(0.05, 0.0);
  s.steps = 1000;
  CHECK(std::isinf(dp::epsilon(s, spec.delta)));
  CHECK_FALSE(dp::budget_exhausted(s, spec));

  spec.epsilon_budget = 100.0;
  CHECK(dp::budget_exhausted(s, spec));  // finite budget, infinite spend
}

TEST_CASE("regime warnings cover low sigma and high sampling rate") {
  const auto low_sigma = dp::regime_warning(dp::make_accountant(0.05, 0.5));
  REQUIRE(low_sigma.has_value());
  CHECK(low_sigma->find("sigma") != std::string::npos);

  const auto high_q = dp::regime_warning(dp::make_accountant(0.25, 1.5));
  REQUIRE(high_q.has_value());
  CHECK(high_q->find("sampling") != std::string::npos);

  CHECK_FALSE(dp::regime_warning(dp::make_accountant(0.05, 1.4)).has_value());
  CHECK_FALSE(dp::regime_warning(dp::make_accountant(0.05, 0.0)).has_value());
}

TEST_CASE("privacy spec validation") {
  dp::PrivacySpec spec;
  CHECK_NOTHROW(spec.validate());

  dp::PrivacySpec bad = spec;
  bad.clip_norm = kInf;  // noisy + unclipped is incoherent
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.noise_multiplier = 0.0;
  CHECK_NOTHROW(bad.validate());

  bad = spec;
  bad.clip_norm = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.noise_multiplier = -0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.delta = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.delta = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.epsilon_budget = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
