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

#include "ascnet/layers.hpp"

#include <string>

namespace ascnet {
namespace {

template <typename T>
Tensor<T> frame_vectors(Tape<T>& tape, const Tensor<T>& h) {
  if (h.rank() == 3) return h;
  if (h.rank() == 4) return mean_axis(tape, h, 1);
  throw DimensionError("attention pooling expects a [BxTxd] or [BxFxTxC] input, got " +
                       shape_str(h.shape()));
}

}  // namespace

template <typename T>
Tensor<T> attention_weights(Tape<T>& tape, const Tensor<T>& h, const AttentionPoolConfig& cfg,
                            const AttentionParams<T>& params) {
  Tensor<T> m = frame_vectors(tape, h);
  const std::size_t B = m.dim(0), Tn = m.dim(1), d = m.dim(2);
  if (d != cfg.d || params.W.shape() != Shape{d, d} || params.b.size() != d ||
      params.u.shape() != Shape{d, 1}) {
    throw DimensionError("attention pooling: width " + std::to_string(d) +
                         " does not match configured d=" + std::to_string(cfg.d) + " / W " +
                         shape_str(params.W.shape()));
  }
  Tensor<T> flat = reshape(tape, m, {B * Tn, d});
  Tensor<T> hidden = tanh(tape, add_bias(tape, matmul(tape, flat, params.W), params.b));
  Tensor<T> scores = reshape(tape, matmul(tape, hidden, params.u), {B, Tn});
  return softmax_rows(tape, scores);
}

template <typename T>
Tensor<T> attention_pooling(Tape<T>& tape, const Tensor<T>& h, const AttentionPoolConfig& cfg,
                            const AttentionParams<T>& params) {
  Tensor<T> w = attention_weights(tape, h, cfg, params);
  const T eps = static_cast<T>(cfg.epsilon);
  if (h.rank() == 4) return weighted_stats(tape, h, w, cfg.use_std, eps);
  const std::size_t B = h.dim(0), Tn = h.dim(1), d = h.dim(2);
  Tensor<T> h4 = reshape(tape, h, {B, 1, Tn, d});
  Tensor<T> pooled = weighted_stats(tape, h4, w, cfg.use_std, eps);
  return reshape(tape, pooled, {B, pooled.dim(2)});
}

template <typename T>
Tensor<T> dense(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b) {
  return add_bias(tape, matmul(tape, x, W), b);
}

template <typename T>
Tensor<T> activation(Tape<T>& tape, const Tensor<T>& x, ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu:
      return relu(tape, x);
    case ActivationKind::leaky_relu:
      return leaky_relu(tape, x, static_cast<T>(kLeakySlope));
  }
  return x;
}

#define ASCNET_INSTANTIATE_LAYERS(T)                                                       \
  template Tensor<T> attention_weights(Tape<T>&, const Tensor<T>&,                         \
                                       const AttentionPoolConfig&, const AttentionParams<T>&); \
  template Tensor<T> attention_pooling(Tape<T>&, const Tensor<T>&,                         \
                                       const AttentionPoolConfig&, const AttentionParams<T>&); \
  template Tensor<T> dense(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> activation(Tape<T>&, const Tensor<T>&, ActivationKind);

ASCNET_INSTANTIATE_LAYERS(float)
ASCNET_INSTANTIATE_LAYERS(double)

}  // namespace ascnet
