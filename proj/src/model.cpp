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

#include "agrifed/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "agrifed/rng.hpp"

namespace agrifed::nn {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMajorMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatrixMap matrix_of(const NamedTensor& t) {
  return ConstMatrixMap(t.values.data(), static_cast<Eigen::Index>(t.shape[0]),
                        static_cast<Eigen::Index>(t.shape[1]));
}

ConstVectorMap vector_of(const NamedTensor& t) {
  return ConstVectorMap(t.values.data(), static_cast<Eigen::Index>(t.values.size()));
}

VectorMap vector_of(NamedTensor& t) {
  return VectorMap(t.values.data(), static_cast<Eigen::Index>(t.values.size()));
}

Eigen::RowVectorXd row_of(const NamedTensor& t) {
  return vector_of(t).transpose();
}

std::string layer_prefix(std::size_t i) { return "layer" + std::to_string(i); }

// Entry indices of one hidden layer inside the flat ParameterSet, resolved
// positionally. Layout per layer: weight, bias, then the four BN tensors when
// present; the head contributes the final weight/bias pair.
struct LayerRefs {
  std::size_t weight, bias;
  std::size_t bn_gain = 0, bn_bias = 0, bn_mean = 0, bn_var = 0;
};

struct ModelRefs {
  std::vector<LayerRefs> layers;
  std::size_t head_weight, head_bias;
};

ModelRefs resolve(const ModelSpec& spec) {
  ModelRefs refs;
  std::size_t idx = 0;
  for (const auto& layer : spec.hidden) {
    LayerRefs r;
    r.weight = idx++;
    r.bias = idx++;
    if (layer.use_bn) {
      r.bn_gain = idx++;
      r.bn_bias = idx++;
      r.bn_mean = idx++;
      r.bn_var = idx++;
    }
    refs.layers.push_back(r);
  }
  refs.head_weight = idx++;
  refs.head_bias = idx++;
  return refs;
}

void check_batch(const ModelSpec& spec, const Eigen::MatrixXd& features) {
  if (features.cols() != spec.input_dim)
    throw std::invalid_argument(
        "batch feature dimension " + std::to_string(features.cols()) +
        " does not match model input dimension " + std::to_string(spec.input_dim));
  if (features.rows() < 1) throw std::invalid_argument("batch is empty");
}

bool has_bn(const ModelSpec& spec) {
  for (const auto& l : spec.hidden)
    if (l.use_bn) return true;
  return false;
}

// Shared forward pass. `stats` picks the BN normalization source; when
// `update_running` is non-null the layer's running statistics get a momentum
// update from the batch moments of the pre-BN activations.
ForwardCache forward_impl(const ModelSpec& spec, const ParameterSet& params,
                          const Eigen::MatrixXd& features, BnStats stats,
                          ParameterSet* update_running, bool want_cache) {
  check_batch(spec, features);
  const ModelRefs refs = resolve(spec);
  const Eigen::Index n = features.rows();

  ForwardCache cache;
  cache.stats = stats;
  if (want_cache) cache.layers.resize(spec.hidden.size());

  Eigen::MatrixXd act = features;
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
    const LayerRefs& r = refs.layers[i];
    Eigen::MatrixXd z = act * matrix_of(params.entries[r.weight]);
    z.rowwise() += row_of(params.entries[r.bias]);

    Eigen::MatrixXd pre;
    Eigen::MatrixXd xhat;
    Eigen::RowVectorXd inv_std;
    if (spec.hidden[i].use_bn) {
      Eigen::RowVectorXd mu, var;
      if (stats == BnStats::batch) {
        mu = z.colwise().mean();
        var = (z.rowwise() - mu).array().square().colwise().mean().matrix();
      } else {
        mu = row_of(params.entries[r.bn_mean]);
        var = row_of(params.entries[r.bn_var]);
      }
      if (update_running != nullptr) {
        Eigen::RowVectorXd bmu, bvar;
        if (stats == BnStats::batch) {
          bmu = mu;
          bvar = var;
        } else {
          bmu = z.colwise().mean();
          bvar = (z.rowwise() - bmu).array().square().colwise().mean().matrix();
        }
        auto rm = vector_of(update_running->entries[r.bn_mean]);
        auto rv = vector_of(update_running->entries[r.bn_var]);
        rm = (1.0 - kBnMomentum) * rm + kBnMomentum * bmu.transpose();
        rv = (1.0 - kBnMomentum) * rv + kBnMomentum * bvar.transpose();
      }
      inv_std = (var.array() + kBnVarianceEps).sqrt().inverse().matrix();
      xhat = ((z.rowwise() - mu).array().rowwise() * inv_std.array()).matrix();
      pre = (xhat.array().rowwise() * row_of(params.entries[r.bn_gain]).array())
                .matrix();
      pre.rowwise() += row_of(params.entries[r.bn_bias]);
    } else {
      pre = std::move(z);
    }

    if (want_cache) {
      LayerCache& lc = cache.layers[i];
      lc.input = act;
      lc.pre_act = pre;
      if (spec.hidden[i].use_bn) {
        lc.xhat = xhat;
        lc.inv_std = inv_std;
      }
    }
    act = pre.cwiseMax(0.0);  // ReLU
  }

  if (want_cache) cache.head_input = act;
  cache.predictions =
      act * vector_of(params.entries[refs.head_weight]) +
      Eigen::VectorXd::Constant(n, params.entries[refs.head_bias].values[0]);
  return cache;
}

}  // namespace

void ModelSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("ModelSpec: input_dim must be >= 1");
  if (output_dim != 1) throw std::invalid_argument("ModelSpec: output_dim must be 1");
  for (const auto& l : hidden)
    if (l.width < 1)
      throw std::invalid_argument("ModelSpec: hidden layer width must be >= 1");
}

void Batch::validate() const {
  if (features.rows() < 1) throw std::invalid_argument("Batch: no rows");
  if (targets.size() != features.rows())
    throw std::invalid_argument("Batch: feature/target row counts differ");
  if (!features.allFinite() || !targets.allFinite())
    throw std::invalid_argument("Batch: non-finite values");
}

ParameterSet init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto eng = rng::engine(rng::derive(seed, rng::Stream::model_init));

  ParameterSet params;
  auto push_dense = [&](const std::string& prefix, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    NamedTensor w;
    w.name = prefix + ".weight";
    w.shape = {static_cast<std::size_t>(fan_in), static_cast<std::size_t>(fan_out)};
    w.values.resize(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& v : w.values) v = u(eng);
    params.entries.push_back(std::move(w));

    NamedTensor b;
    b.name = prefix + ".bias";
    b.shape = {static_cast<std::size_t>(fan_out)};
    b.values.assign(static_cast<std::size_t>(fan_out), 0.0);
    params.entries.push_back(std::move(b));
  };

  int in_dim = spec.input_dim;
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
    const auto& layer = spec.hidden[i];
    push_dense(layer_prefix(i), in_dim, layer.width);
    if (layer.use_bn) {
      const std::size_t w = static_cast<std::size_t>(layer.width);
      auto push_bn = [&](const std::string& suffix, double fill) {
        NamedTensor t;
        t.name = layer_prefix(i) + ".bn." + suffix;
        t.shape = {w};
        t.values.assign(w, fill);
        t.is_bn = true;
        params.entries.push_back(std::move(t));
      };
      push_bn("gain", 1.0);
      push_bn("bias", 0.0);
      push_bn("running_mean", 0.0);
      push_bn("running_var", 1.0);
    }
    in_dim = layer.width;
  }
  push_dense("head", in_dim, spec.output_dim);
  return params;
}

std::size_t parameter_count(const ParameterSet& params) { return params.total_size(); }

Eigen::VectorXd forward_eval(const ModelSpec& spec, const ParameterSet& params,
                             const Eigen::MatrixXd& features) {
  return forward_impl(spec, params, features, BnStats::frozen, nullptr, false)
      .predictions;
}

ForwardCache forward_train(const ModelSpec& spec, ParameterSet& params,
                           const Batch& batch) {
  batch.validate();
  if (has_bn(spec) && batch.features.rows() < 2)
    throw std::invalid_argument(
        "train-mode forward with batch norm needs at least 2 examples");
  return forward_impl(spec, params, batch.features, BnStats::batch, &params, true);
}

ForwardCache forward_frozen(const ModelSpec& spec, const ParameterSet& params,
                            const Eigen::MatrixXd& features) {
  return forward_impl(spec, params, features, BnStats::frozen, nullptr, true);
}

void update_running_stats(const ModelSpec& spec, ParameterSet& params,
                          const Eigen::MatrixXd& features) {
  forward_impl(spec, params, features, BnStats::frozen, &params, false);
}

double loss_mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets) {
  if (predictions.size() != targets.size())
    throw std::invalid_argument("loss_mse: length mismatch");
  if (predictions.size() < 1) throw std::invalid_argument("loss_mse: empty input");
  return (predictions - targets).array().square().mean();
}

GradientSet zero_gradients(const ModelSpec& spec) {
  spec.validate();
  GradientSet g;
  auto push = [&](const std::string& name, std::vector<std::size_t> shape,
                  bool is_bn) {
    NamedTensor t;
    t.name = name;
    t.shape = std::move(shape);
    t.is_bn = is_bn;
    std::size_t total = 1;
    for (std::size_t d : t.shape) total *= d;
    t.values.assign(total, 0.0);
    g.entries.push_back(std::move(t));
  };

  std::size_t in_dim = static_cast<std::size_t>(spec.input_dim);
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
    const std::size_t w = static_cast<std::size_t>(spec.hidden[i].width);
    push(layer_prefix(i) + ".weight", {in_dim, w}, false);
    push(layer_prefix(i) + ".bias", {w}, false);
    if (spec.hidden[i].use_bn) {
      // Running statistics carry no gradient; only gain and bias train.
      push(layer_prefix(i) + ".bn.gain", {w}, true);
      push(layer_prefix(i) + ".bn.bias", {w}, true);
    }
    in_dim = w;
  }
  push("head.weight", {in_dim, static_cast<std::size_t>(spec.output_dim)}, false);
  push("head.bias", {static_cast<std::size_t>(spec.output_dim)}, false);
  return g;
}

GradientSet backward(const ModelSpec& spec, const ParameterSet& params,
                     const ForwardCache& cache, const Eigen::VectorXd& targets) {
  const ModelRefs refs = resolve(spec);
  const Eigen::Index n = cache.predictions.size();
  if (targets.size() != n)
    throw std::invalid_argument("backward: target length mismatch");

  GradientSet grads = zero_gradients(spec);
  // Gradient entries mirror the trainable parameter order; walk them from the
  // back while unwinding the layers.
  std::size_t gi = grads.entries.size();
  auto grad_vec = [&](std::size_t index) { return vector_of(grads.entries[index]); };

  // d(mean squared error)/d(predictions)
  Eigen::VectorXd dpred =
      2.0 / static_cast<double>(n) * (cache.predictions - targets);

  const std::size_t g_head_bias = --gi;
  const std::size_t g_head_weight = --gi;
  grad_vec(g_head_weight) = cache.head_input.transpose() * dpred;
  grads.entries[g_head_bias].values[0] = dpred.sum();

  Eigen::MatrixXd dact =
      dpred * vector_of(params.entries[refs.head_weight]).transpose();

  for (std::size_t li = spec.hidden.size(); li-- > 0;) {
    const LayerRefs& r = refs.layers[li];
    const LayerCache& lc = cache.layers[li];
    std::size_t g_bn_bias = 0, g_bn_gain = 0;
    if (spec.hidden[li].use_bn) {
      g_bn_bias = --gi;
      g_bn_gain = --gi;
    }
    const std::size_t g_bias = --gi;
    const std::size_t g_weight = --gi;

    // ReLU gate.
    Eigen::MatrixXd dpre = (lc.pre_act.array() > 0.0)
                               .select(dact, Eigen::MatrixXd::Zero(n, dact.cols()));

    Eigen::MatrixXd dz;
    if (spec.hidden[li].use_bn) {
      grad_vec(g_bn_gain) =
          (dpre.array() * lc.xhat.array()).colwise().sum().matrix().transpose();
      grad_vec(g_bn_bias) = dpre.colwise().sum().transpose();

      Eigen::MatrixXd dxhat =
          (dpre.array().rowwise() * row_of(params.entries[r.bn_gain]).array())
              .matrix();
      if (cache.stats == BnStats::batch) {
        // Batch statistics participate in the normalization, so their
        // dependence on every example enters the gradient.
        Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
        Eigen::RowVectorXd sum_dxhat_xhat =
            (dxhat.array() * lc.xhat.array()).colwise().sum().matrix();
        dz = (dxhat * static_cast<double>(n)).rowwise() - sum_dxhat;
        dz.array() -= lc.xhat.array().rowwise() * sum_dxhat_xhat.array();
        dz.array().rowwise() *= (lc.inv_std / static_cast<double>(n)).array();
      } else {
        dz = (dxhat.array().rowwise() * lc.inv_std.array()).matrix();
      }
    } else {
      dz = std::move(dpre);
    }

    MatrixMap(grads.entries[g_weight].values.data(), lc.input.cols(), dz.cols()) =
        lc.input.transpose() * dz;
    grad_vec(g_bias) = dz.colwise().sum().transpose();
    if (li > 0) dact = dz * matrix_of(params.entries[r.weight]).transpose();
  }
  return grads;
}

std::vector<GradientSet> per_example_gradients(const ModelSpec& spec,
                                               const ParameterSet& params,
                                               const Batch& batch) {
  batch.validate();
  const ModelRefs refs = resolve(spec);
  const ForwardCache cache = forward_frozen(spec, params, batch.features);
  const Eigen::Index n = batch.features.rows();

  const GradientSet zero = zero_gradients(spec);
  std::vector<GradientSet> out(static_cast<std::size_t>(n), zero);

  for (Eigen::Index i = 0; i < n; ++i) {
    GradientSet& g = out[static_cast<std::size_t>(i)];
    std::size_t gi = g.entries.size();
    auto grad_vec = [&](std::size_t index) { return vector_of(g.entries[index]); };

    // d(y_i - t_i)^2 / dy_i; no 1/n factor so averaging the per-example
    // gradients reproduces the batch gradient.
    const double dpred = 2.0 * (cache.predictions[i] - batch.targets[i]);

    const std::size_t g_head_bias = --gi;
    const std::size_t g_head_weight = --gi;
    grad_vec(g_head_weight) = cache.head_input.row(i).transpose() * dpred;
    g.entries[g_head_bias].values[0] = dpred;

    Eigen::RowVectorXd dact =
        dpred * vector_of(params.entries[refs.head_weight]).transpose();

    for (std::size_t li = spec.hidden.size(); li-- > 0;) {
      const LayerRefs& r = refs.layers[li];
      const LayerCache& lc = cache.layers[li];
      std::size_t g_bn_bias = 0, g_bn_gain = 0;
      if (spec.hidden[li].use_bn) {
        g_bn_bias = --gi;
        g_bn_gain = --gi;
      }
      const std::size_t g_bias = --gi;
      const std::size_t g_weight = --gi;

      Eigen::RowVectorXd dpre =
          (lc.pre_act.row(i).array() > 0.0)
              .select(dact, Eigen::RowVectorXd::Zero(dact.cols()));

      Eigen::RowVectorXd dz;
      if (spec.hidden[li].use_bn) {
        grad_vec(g_bn_gain) =
            (dpre.array() * lc.xhat.row(i).array()).matrix().transpose();
        grad_vec(g_bn_bias) = dpre.transpose();
        dz = (dpre.array() * row_of(params.entries[r.bn_gain]).array() *
              lc.inv_std.array())
                 .matrix();
      } else {
        dz = dpre;
      }

      MatrixMap(g.entries[g_weight].values.data(), lc.input.cols(), dz.cols()) =
          lc.input.row(i).transpose() * dz;
      grad_vec(g_bias) = dz.transpose();
      if (li > 0) dact = dz * matrix_of(params.entries[r.weight]).transpose();
    }
  }
  return out;
}

void sgd_step(ParameterSet& params, const GradientSet& grads, double lr) {
  if (lr <= 0.0) throw std::invalid_argument("sgd_step: learning rate must be > 0");
  for (const auto& ge : grads.entries) {
    NamedTensor* pe = params.find(ge.name);
    if (pe == nullptr || pe->shape != ge.shape)
      throw std::invalid_argument("sgd_step: no parameter matching gradient '" +
                                  ge.name + "'");
    for (std::size_t j = 0; j < pe->values.size(); ++j)
      pe->values[j] -= lr * ge.values[j];
  }
}

}  // namespace agrifed::nn
