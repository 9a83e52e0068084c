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

#include "agrifed/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace agrifed {

namespace {

template <typename Bag>
std::size_t bag_total_size(const Bag& bag) {
  std::size_t n = 0;
  for (const auto& e : bag.entries) n += e.size();
  return n;
}

template <typename Bag>
bool bag_same_structure(const Bag& a, const Bag& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i];
    const auto& y = b.entries[i];
    if (x.name != y.name || x.shape != y.shape || x.is_bn != y.is_bn) return false;
  }
  return true;
}

}  // namespace

std::size_t ParameterSet::total_size() const { return bag_total_size(*this); }
std::size_t GradientSet::total_size() const { return bag_total_size(*this); }

const NamedTensor* ParameterSet::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

NamedTensor* ParameterSet::find(const std::string& name) {
  for (auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

bool same_structure(const ParameterSet& a, const ParameterSet& b) {
  return bag_same_structure(a, b);
}

bool same_structure(const GradientSet& a, const GradientSet& b) {
  return bag_same_structure(a, b);
}

bool bitwise_equal(const ParameterSet& a, const ParameterSet& b) {
  if (!same_structure(a, b)) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    if (a.entries[i].values != b.entries[i].values) return false;
  return true;
}

double l2_norm(const GradientSet& g) {
  double ss = 0.0;
  for (const auto& e : g.entries)
    for (double v : e.values) ss += v * v;
  return std::sqrt(ss);
}

void axpy(GradientSet& out, const GradientSet& g, double scale) {
  if (!same_structure(out, g))
    throw std::invalid_argument("axpy: gradient structures differ");
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    auto& dst = out.entries[i].values;
    const auto& src = g.entries[i].values;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

void scale_inplace(GradientSet& g, double factor) {
  for (auto& e : g.entries)
    for (double& v : e.values) v *= factor;
}

GradientSet zeros_like(const GradientSet& g) {
  GradientSet out = g;
  for (auto& e : out.entries) e.values.assign(e.values.size(), 0.0);
  return out;
}

std::vector<NamedTensor> extract_bn_entries(const ParameterSet& params) {
  std::vector<NamedTensor> out;
  for (const auto& e : params.entries)
    if (e.is_bn) out.push_back(e);
  return out;
}

void splice_bn_entries(ParameterSet& params, const std::vector<NamedTensor>& bn) {
  for (const auto& b : bn) {
    NamedTensor* dst = params.find(b.name);
    if (dst == nullptr || !dst->is_bn || dst->shape != b.shape)
      throw std::invalid_argument("splice_bn_entries: no matching BN entry for '" +
                                  b.name + "'");
    dst->values = b.values;
  }
}

}  // namespace agrifed
