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

#include <cstdint>
#include <span>
#include <vector>

#include "ascnet/rng.hpp"
#include "ascnet/tensor.hpp"

// Differentiable tensor operations. Each op computes its output eagerly and,
// when the tape is enabled and an input requires a gradient, records a
// backward rule that accumulates (+=) into the inputs' gradients.
namespace ascnet {

enum class Mode { train, infer };

// ---- linear algebra / elementwise -----------------------------------------

// [m x k] * [k x n] -> [m x n].
template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// Adds bias[n] along the last axis of x.
template <typename T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> leaky_relu(Tape<T>& tape, const Tensor<T>& x, T slope);

template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);

// Mean over one axis; the axis is removed from the output shape.
template <typename T>
Tensor<T> mean_axis(Tape<T>& tape, const Tensor<T>& x, std::size_t axis);

// Row-wise softmax of a [rows x cols] tensor.
template <typename T>
Tensor<T> softmax_rows(Tape<T>& tape, const Tensor<T>& x);

// Mean over the batch of -log softmax(logits)[target]. logits: [B x K].
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                std::span<const int> targets);

// Non-differentiable helper: stable row softmax of a plain buffer.
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

// ---- layer primitives -----------------------------------------------------

// Same-padded 2D cross-correlation. x: [B x F x T x Cin],
// kernel: [kh x kw x Cin x Cout] (odd kh, kw), bias: [Cout].
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& kernel,
                 const Tensor<T>& bias);

// Temporal context convolution. x: [B x T x Cin],
// weights: [offsets.size() x Cin x Cout], bias: [Cout]; taps outside [0, T)
// read zero.
template <typename T>
Tensor<T> conv1d_ctx(Tape<T>& tape, const Tensor<T>& x, std::span<const int> offsets,
                     const Tensor<T>& weights, const Tensor<T>& bias);

// 2 x 1 max pooling along frequency. x: [B x F x T x C] -> [B x F/2 x T x C].
// Gradient goes to the first maximum of each pair.
template <typename T>
Tensor<T> maxpool_freq(Tape<T>& tape, const Tensor<T>& x);

// Max-feature-map over the last axis with split-half pairing:
// out[..., i] = max(x[..., i], x[..., i + C/2]); ties go to i.
template <typename T>
Tensor<T> mfm(Tape<T>& tape, const Tensor<T>& x);

// Batch normalization along one axis of x (statistics over all others).
// running_mean / running_var are updated in train mode with momentum 0.9.
template <typename T>
Tensor<T> batchnorm(Tape<T>& tape, const Tensor<T>& x, std::size_t axis,
                    const Tensor<T>& gamma, const Tensor<T>& beta,
                    std::span<T> running_mean, std::span<T> running_var, Mode mode,
                    T momentum = T(0.9), T eps = T(1e-5));

// Inverted dropout. Identity in infer mode or when rate == 0.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate, Mode mode, CounterRng& rng);

// Weighted statistics along the time axis. h: [B x F x T x C], w: [B x T].
// Returns [B x F x C] weighted means, or [B x F x 2C] with the weighted
// standard deviations sqrt(sum_t w_t (h_t - mu)^2 + eps) appended on the
// last axis when use_std is set.
template <typename T>
Tensor<T> weighted_stats(Tape<T>& tape, const Tensor<T>& h, const Tensor<T>& w, bool use_std,
                         T eps);

}  // namespace ascnet
