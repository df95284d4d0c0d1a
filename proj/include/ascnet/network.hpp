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
#include <map>
#include <string>
#include <vector>

#include "ascnet/layers.hpp"
#include "ascnet/ops.hpp"
#include "ascnet/rng.hpp"
#include "ascnet/tensor.hpp"
#include "ascnet/topology.hpp"

namespace ascnet {

// A named tensor owned by a network. Trainable parameters require gradients;
// buffers (batchnorm running statistics) do not.
template <typename T>
struct NamedTensor {
  std::string name;   // "<layer>.<role>", e.g. "Conv2D-1-1.weight"
  std::string layer;  // owning layer name
  Tensor<T> value;
};

// Executable form of a NetworkSpec.
template <typename T>
class Network {
 public:
  // Weights: He-normal for conv and hidden dense layers, LeCun-normal for the
  // output layer and the attention scorer; zero biases; unit batchnorm.
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }

  // x: [B x n_mels x T x 1] for 2D topologies, [B x T x n_mels] for x-vector.
  // Returns pre-softmax scores [B x n_classes]. `dropout_rng` is only drawn
  // from in train mode.
  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& x, Mode mode, CounterRng& dropout_rng);

  std::vector<NamedTensor<T>>& parameters() { return params_; }
  const std::vector<NamedTensor<T>>& parameters() const { return params_; }
  std::vector<NamedTensor<T>>& buffers() { return buffers_; }
  const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }

  // Parameters followed by buffers, in construction order.
  std::vector<const NamedTensor<T>*> state() const;
  // Copies values from `source` (same names and shapes, any precision).
  template <typename U>
  void load_state(const Network<U>& source);
  // Sets a named tensor from raw values. Throws IntegrityError on unknown
  // names or size mismatch.
  void set_state(const std::string& name, std::span<const T> values);

  // Total trainable + statistics element count; equals param_count(spec).total.
  std::size_t element_count() const;

 private:
  struct Slot {
    int weight = -1, bias = -1, gamma = -1, beta = -1;
    int att_W = -1, att_b = -1, att_u = -1;
    int running_mean = -1, running_var = -1;
  };

  int add_param(const std::string& layer, const std::string& role, Shape shape);
  int add_buffer(const std::string& layer, const std::string& role, Shape shape, T fill);

  NetworkSpec spec_;
  std::vector<NamedTensor<T>> params_;
  std::vector<NamedTensor<T>> buffers_;
  std::vector<Slot> slots_;  // aligned with spec_.layers
};

template <typename T>
template <typename U>
void Network<T>::load_state(const Network<U>& source) {
  for (const NamedTensor<U>* s : source.state()) {
    std::vector<T> v(s->value.data().begin(), s->value.data().end());
    set_state(s->name, v);
  }
}

}  // namespace ascnet
