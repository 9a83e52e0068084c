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

#include "agrifed/tensor.hpp"

using namespace agrifed;

namespace {

NamedTensor make(const std::string& name, std::vector<double> values,
                 bool is_bn = false) {
  NamedTensor t;
  t.name = name;
  t.shape = {values.size()};
  t.values = std::move(values);
  t.is_bn = is_bn;
  return t;
}

ParameterSet sample_params() {
  ParameterSet p;
  p.entries.push_back(make("w", {1.0, 2.0}));
  p.entries.push_back(make("g", {3.0}, true));
  return p;
}

GradientSet sample_grads() {
  GradientSet g;
  g.entries.push_back(make("w", {3.0, 4.0}));
  return g;
}

}  // namespace

TEST_CASE("total size and find") {
  ParameterSet p = sample_params();
  CHECK(p.total_size() == 3);
  REQUIRE(p.find("g") != nullptr);
  CHECK(p.find("g")->values[0] == 3.0);
  CHECK(p.find("missing") == nullptr);
}

TEST_CASE("same_structure checks names shapes and flags") {
  ParameterSet a = sample_params();
  ParameterSet b = sample_params();
  CHECK(same_structure(a, b));

  b.entries[0].name = "other";
  CHECK_FALSE(same_structure(a, b));

  b = sample_params();
  b.entries[1].shape = {2};
  b.entries[1].values = {3.0, 3.0};
  CHECK_FALSE(same_structure(a, b));

  b = sample_params();
  b.entries[1].is_bn = false;
  CHECK_FALSE(same_structure(a, b));

  b = sample_params();
  b.entries.pop_back();
  CHECK_FALSE(same_structure(a, b));
}

TEST_CASE("bitwise_equal distinguishes values") {
  ParameterSet a = sample_params();
  ParameterSet b = sample_params();
  CHECK(bitwise_equal(a, b));
  b.entries[0].values[1] = std::nextafter(2.0, 3.0);
  CHECK_FALSE(bitwise_equal(a, b));
}

TEST_CASE("l2 norm over concatenated entries") {
  GradientSet g = sample_grads();
  CHECK(l2_norm(g) == doctest::Approx(5.0).epsilon(1e-15));

  GradientSet two;
  two.entries.push_back(make("a", {3.0}));
  two.entries.push_back(make("b", {4.0}));
  CHECK(l2_norm(two) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("axpy and scale_inplace arithmetic") {
  GradientSet out = sample_grads();
  GradientSet g = sample_grads();
  axpy(out, g, 0.5);
  CHECK(out.entries[0].values[0] == doctest::Approx(4.5));
  CHECK(out.entries[0].values[1] == doctest::Approx(6.0));

  scale_inplace(out, 2.0);
  CHECK(out.entries[0].values[0] == doctest::Approx(9.0));
  CHECK(out.entries[0].values[1] == doctest::Approx(12.0));
}

TEST_CASE("zeros_like preserves structure, zeroes values") {
  GradientSet g = sample_grads();
  GradientSet z = zeros_like(g);
  CHECK(same_structure(g, z));
  for (const auto& e : z.entries)
    for (double v : e.values) CHECK(v == 0.0);
}

TEST_CASE("bn entries extract and splice round trip") {
  ParameterSet p = sample_params();
  std::vector<NamedTensor> bn = extract_bn_entries(p);
  REQUIRE(bn.size() == 1);
  CHECK(bn[0].name == "g");

  bn[0].values[0] = 42.0;
  splice_bn_entries(p, bn);
  CHECK(p.find("g")->values[0] == 42.0);
  CHECK(p.find("w")->values[0] == 1.0);
}
