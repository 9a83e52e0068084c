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

#ifndef AGRIFED_TENSOR_HPP_
#define AGRIFED_TENSOR_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace agrifed {

// One named, shaped, row-major tensor of 64-bit reals. `is_bn` marks the four
// batch-norm roles (gain, bias, running mean, running variance) so federated
// aggregation can treat them specially.
struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  bool is_bn = false;

  std::size_t size() const { return values.size(); }
};

// The unit exchanged between server and silos: an ordered list of named
// tensors. Entry order and shapes are identical across every ParameterSet
// built from the same ModelSpec.
struct ParameterSet {
  std::vector<NamedTensor> entries;

  std::size_t total_size() const;
  const NamedTensor* find(const std::string& name) const;
  NamedTensor* find(const std::string& name);
};

// Gradients mirror the trainable entries of a ParameterSet (dense weights and
// biases, BN gain and bias). Running statistics never appear here.
struct GradientSet {
  std::vector<NamedTensor> entries;

  std::size_t total_size() const;
};

bool same_structure(const ParameterSet& a, const ParameterSet& b);
bool same_structure(const GradientSet& a, const GradientSet& b);
bool bitwise_equal(const ParameterSet& a, const ParameterSet& b);

// L2 norm over the concatenation of all entries.
double l2_norm(const GradientSet& g);

// out += scale * g  (structures must match).
void axpy(GradientSet& out, const GradientSet& g, double scale);
void scale_inplace(GradientSet& g, double factor);
GradientSet zeros_like(const GradientSet& g);

// Batch-norm entry handling for FedBN: pull out / push back the is_bn-flagged
// tensors of a ParameterSet.
std::vector<NamedTensor> extract_bn_entries(const ParameterSet& params);
void splice_bn_entries(ParameterSet& params, const std::vector<NamedTensor>& bn);

}  // namespace agrifed

#endif  // AGRIFED_TENSOR_HPP_
