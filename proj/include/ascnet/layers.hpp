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

#pragma once

#include <cstddef>

#include "ascnet/ops.hpp"
#include "ascnet/tensor.hpp"

namespace ascnet {

enum class ActivationKind { relu, leaky_relu };

constexpr double kLeakySlope = 0.01;

struct AttentionPoolConfig {
  std::size_t d = 0;  // channel width of the attention input
  bool use_std = false;
  double epsilon = 1e-6;
};

// Frame scorer e_t = u^T tanh(W m_t + b). W is stored [d x d] and applied as
// m_t^T W, u as [d x 1].
template <typename T>
struct AttentionParams {
  Tensor<T> W;
  Tensor<T> b;
  Tensor<T> u;
};

constexpr std::size_t attention_param_count(std::size_t d) { return d * d + 2 * d; }

// Softmax-normalized frame weights [B x T]. For 1D input h: [B x T x d] the
// frame vector m_t is h_t; for 2D input h: [B x F x T x C] it is the
// frequency-averaged channel vector.
template <typename T>
Tensor<T> attention_weights(Tape<T>& tape, const Tensor<T>& h, const AttentionPoolConfig& cfg,
                            const AttentionParams<T>& params);

// Self-attentive statistics pooling over time.
//   1D input [B x T x d]     -> [B x d], or [B x 2d] (mean ++ std) with use_std
//   2D input [B x F x T x C] -> [B x F x C] (one weight per frame pools the
//                               whole F x C slice)
template <typename T>
Tensor<T> attention_pooling(Tape<T>& tape, const Tensor<T>& h, const AttentionPoolConfig& cfg,
                            const AttentionParams<T>& params);

// x: [B x din], W: [din x dout], b: [dout].
template <typename T>
Tensor<T> dense(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b);

template <typename T>
Tensor<T> activation(Tape<T>& tape, const Tensor<T>& x, ActivationKind kind);

}  // namespace ascnet
