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

#ifndef AGRIFED_MODEL_HPP_
#define AGRIFED_MODEL_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "agrifed/tensor.hpp"

namespace agrifed::nn {

// Feed-forward regressor: dense -> (batch norm) -> ReLU blocks followed by a
// scalar linear head. All arithmetic is in 64-bit reals.
struct HiddenLayer {
  int width = 0;
  bool use_bn = false;
};

struct ModelSpec {
  int input_dim = 0;
  std::vector<HiddenLayer> hidden;
  int output_dim = 1;  // scalar regression head

  void validate() const;  // throws std::invalid_argument on bad dims
};

struct Batch {
  Eigen::MatrixXd features;  // n x input_dim
  Eigen::VectorXd targets;   // n

  void validate() const;  // n >= 1, dims consistent, all finite
};

// Variance floor inside batch-norm denominators and momentum of the running
// statistics.
inline constexpr double kBnVarianceEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

// Which statistics batch-norm layers normalize with.
//   batch  - statistics of the current minibatch (standard training mode;
//            requires n >= 2 and updates running statistics when requested).
//   frozen - the stored running statistics. Each example's output is then
//            independent of the rest of the batch, which is what makes
//            per-example gradients well defined.
enum class BnStats { batch, frozen };

// Forward activations kept for the backward pass.
struct LayerCache {
  Eigen::MatrixXd input;      // activations entering the dense layer
  Eigen::MatrixXd xhat;       // normalized pre-activations (BN layers only)
  Eigen::RowVectorXd inv_std; // 1/sqrt(var + eps) used for normalization
  Eigen::MatrixXd pre_act;    // value fed into ReLU (post-BN or post-dense)
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Eigen::MatrixXd head_input;
  Eigen::VectorXd predictions;
  BnStats stats = BnStats::batch;
};

// Deterministic initialization: dense weights uniform in
// +-sqrt(6 / (fan_in + fan_out)), dense biases zero, BN gain 1 / bias 0 /
// running mean 0 / running variance 1. Same (spec, seed) gives bitwise
// identical results.
ParameterSet init_model(const ModelSpec& spec, std::uint64_t seed);

// Number of values across all entries (running statistics included).
std::size_t parameter_count(const ParameterSet& params);

// Eval-mode forward: running statistics, no mutation, no cache.
Eigen::VectorXd forward_eval(const ModelSpec& spec, const ParameterSet& params,
                             const Eigen::MatrixXd& features);

// Train-mode forward: batch statistics, updates running statistics in place
// with momentum kBnMomentum. Requires n >= 2 when the model has BN layers.
ForwardCache forward_train(const ModelSpec& spec, ParameterSet& params,
                           const Batch& batch);

// Frozen-statistics forward that still records a cache, so gradients can be
// taken with BN statistics held fixed. Does not mutate params.
ForwardCache forward_frozen(const ModelSpec& spec, const ParameterSet& params,
                            const Eigen::MatrixXd& features);

// Mean squared error. Lengths must match and be >= 1.
double loss_mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets);

// Analytic gradients of the mean-squared-error loss w.r.t. every trainable
// tensor. The cache must come from a forward on these same params.
GradientSet backward(const ModelSpec& spec, const ParameterSet& params,
                     const ForwardCache& cache, const Eigen::VectorXd& targets);

// Per-example gradients of the squared residual (y_i - t_i)^2, computed under
// the frozen-statistics BN convention. Their mean equals `backward` on a
// frozen-statistics cache of the same batch.
std::vector<GradientSet> per_example_gradients(const ModelSpec& spec,
                                               const ParameterSet& params,
                                               const Batch& batch);

// Refresh BN running statistics from the batch without touching any trainable
// tensor. Used by the privatized training path, where the gradient step never
// sees batch statistics.
void update_running_stats(const ModelSpec& spec, ParameterSet& params,
                          const Eigen::MatrixXd& features);

// params -= lr * grads for every trainable tensor; running statistics are
// untouched. Shapes must match.
void sgd_step(ParameterSet& params, const GradientSet& grads, double lr);

// An all-zero gradient with the trainable structure of `params`.
GradientSet zero_gradients(const ModelSpec& spec);

}  // namespace agrifed::nn

#endif  // AGRIFED_MODEL_HPP_
