// Copyright 2026 The ascnet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ascnet/network.hpp"

#include <cmath>

#include "ascnet/errors.hpp"

namespace ascnet {
namespace {

bool is_last_dense(const NetworkSpec& spec, std::size_t i) {
  for (std::size_t j = i + 1; j < spec.layers.size(); ++j)
    if (spec.layers[j].kind == LayerKind::dense) return false;
  return true;
}

template <typename T>
void fill_normal(Tensor<T>& t, double stddev, CounterRng rng) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(stddev * rng.normal());
}

std::uint64_t name_word(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

template <typename T>
int Network<T>::add_param(const std::string& layer, const std::string& role, Shape shape) {
  params_.push_back({layer + "." + role, layer, Tensor<T>(std::move(shape), true)});
  return static_cast<int>(params_.size() - 1);
}

template <typename T>
int Network<T>::add_buffer(const std::string& layer, const std::string& role, Shape shape,
                           T fill) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = fill;
  buffers_.push_back({layer + "." + role, layer, t});
  return static_cast<int>(buffers_.size() - 1);
}

template <typename T>
Network<T>::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  propagate_shapes(spec_, 16);
  slots_.resize(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    Slot& s = slots_[i];
    auto init = [&](int idx, double stddev) {
      auto& p = params_[static_cast<std::size_t>(idx)];
      fill_normal(p.value, stddev, CounterRng(seed, {name_word(p.name)}));
    };
    switch (l.kind) {
      case LayerKind::conv2d: {
        s.weight = add_param(l.name, "weight", {l.kernel_h, l.kernel_w, l.in_channels, l.out_channels});
        s.bias = add_param(l.name, "bias", {l.out_channels});
        init(s.weight, std::sqrt(2.0 / static_cast<double>(l.kernel_h * l.kernel_w * l.in_channels)));
        break;
      }
      case LayerKind::conv1d: {
        s.weight = add_param(l.name, "weight", {l.offsets.size(), l.in_channels, l.out_channels});
        s.bias = add_param(l.name, "bias", {l.out_channels});
        init(s.weight, std::sqrt(2.0 / static_cast<double>(l.offsets.size() * l.in_channels)));
        break;
      }
      case LayerKind::dense: {
        s.weight = add_param(l.name, "weight", {l.in_channels, l.out_channels});
        s.bias = add_param(l.name, "bias", {l.out_channels});
        const double gain = is_last_dense(spec_, i) ? 1.0 : 2.0;
        init(s.weight, std::sqrt(gain / static_cast<double>(l.in_channels)));
        break;
      }
      case LayerKind::batchnorm: {
        s.gamma = add_param(l.name, "gamma", {l.norm_length});
        s.beta = add_param(l.name, "beta", {l.norm_length});
        for (std::size_t k = 0; k < l.norm_length; ++k) params_[static_cast<std::size_t>(s.gamma)].value[k] = T(1);
        s.running_mean = add_buffer(l.name, "running_mean", {l.norm_length}, T(0));
        s.running_var = add_buffer(l.name, "running_var", {l.norm_length}, T(1));
        break;
      }
      case LayerKind::attention_pool: {
        const std::size_t d = l.in_channels;
        s.att_W = add_param(l.name, "W", {d, d});
        s.att_b = add_param(l.name, "b", {d});
        s.att_u = add_param(l.name, "u", {d, 1});
        init(s.att_W, std::sqrt(1.0 / static_cast<double>(d)));
        init(s.att_u, std::sqrt(1.0 / static_cast<double>(d)));
        break;
      }
      default:
        break;
    }
  }
}

template <typename T>
Tensor<T> Network<T>::forward(Tape<T>& tape, const Tensor<T>& x, Mode mode,
                              CounterRng& dropout_rng) {
  const std::size_t n_mels = spec_.options.n_mels;
  if (spec_.is_2d()) {
    if (x.rank() != 4 || x.dim(1) != n_mels || x.dim(3) != 1)
      throw DimensionError(spec_.name + " expects input [B x " + std::to_string(n_mels) +
                           " x T x 1], got " + shape_str(x.shape()));
  } else if (x.rank() != 3 || x.dim(2) != n_mels) {
    throw DimensionError(spec_.name + " expects input [B x T x " + std::to_string(n_mels) +
                         "], got " + shape_str(x.shape()));
  }
  auto P = [&](int idx) -> const Tensor<T>& { return params_[static_cast<std::size_t>(idx)].value; };
  auto buf = [&](int idx) { return buffers_[static_cast<std::size_t>(idx)].value.data(); };

  Tensor<T> h = x;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const Slot& s = slots_[i];
    switch (l.kind) {
      case LayerKind::conv2d:
        h = conv2d(tape, h, P(s.weight), P(s.bias));
        break;
      case LayerKind::conv1d:
        h = conv1d_ctx(tape, h, std::span<const int>(l.offsets), P(s.weight), P(s.bias));
        break;
      case LayerKind::maxpool:
        h = maxpool_freq(tape, h);
        break;
      case LayerKind::mfm:
        h = mfm(tape, h);
        break;
      case LayerKind::batchnorm: {
        const std::size_t axis = l.norm_axis == NormAxis::frequency ? 1 : h.rank() - 1;
        h = batchnorm(tape, h, axis, P(s.gamma), P(s.beta), buf(s.running_mean),
                      buf(s.running_var), mode);
        break;
      }
      case LayerKind::dense:
        h = dense(tape, h, P(s.weight), P(s.bias));
        break;
      case LayerKind::dropout:
        h = dropout(tape, h, l.dropout_rate, mode, dropout_rng);
        break;
      case LayerKind::activation:
        h = activation(tape, h, l.activation);
        break;
      case LayerKind::attention_pool: {
        const AttentionPoolConfig cfg{l.in_channels, l.use_std};
        const AttentionParams<T> ap{P(s.att_W), P(s.att_b), P(s.att_u)};
        h = attention_pooling(tape, h, cfg, ap);
        break;
      }
      case LayerKind::flatten:
        h = reshape(tape, h, {h.dim(0), h.size() / h.dim(0)});
        break;
      case LayerKind::softmax:
        break;
    }
  }
  return h;
}

template <typename T>
std::vector<const NamedTensor<T>*> Network<T>::state() const {
  std::vector<const NamedTensor<T>*> out;
  for (const auto& p : params_) out.push_back(&p);
  for (const auto& b : buffers_) out.push_back(&b);
  return out;
}

template <typename T>
void Network<T>::set_state(const std::string& name, std::span<const T> values) {
  for (auto* group : {&params_, &buffers_}) {
    for (auto& t : *group) {
      if (t.name != name) continue;
      if (t.value.size() != values.size())
        throw IntegrityError("state '" + name + "' has " + std::to_string(values.size()) +
                             " values, expected " + std::to_string(t.value.size()));
      std::copy(values.begin(), values.end(), t.value.data().begin());
      return;
    }
  }
  throw IntegrityError("unknown state tensor '" + name + "'");
}

template <typename T>
std::size_t Network<T>::element_count() const {
  std::size_t n = 0;
  for (const auto* t : state()) n += t->value.size();
  return n;
}

template class Network<float>;
template class Network<double>;

}  // namespace ascnet
