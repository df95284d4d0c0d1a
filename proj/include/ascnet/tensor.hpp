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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ascnet/errors.hpp"

namespace ascnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major n-dimensional array that can take part in reverse-mode
// differentiation. Tensor is a handle: copies share storage, which is what
// lets the tape refer to activations after the forward pass returns.
//
// Batched layer inputs carry a leading batch axis; 2D feature maps are laid
// out (batch, frequency, time, channel) and 1D sequences (batch, time,
// feature).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(storage_); }
  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return storage_->shape.at(axis); }
  std::size_t size() const { return storage_->data.size(); }

  std::span<T> data() { return storage_->data; }
  std::span<const T> data() const { return storage_->data; }
  T& operator[](std::size_t i) { return storage_->data[i]; }
  const T& operator[](std::size_t i) const { return storage_->data[i]; }
  T item() const;

  bool requires_grad() const { return storage_->requires_grad; }
  void set_requires_grad(bool value) { storage_->requires_grad = value; }

  // Gradient state lives in the shared storage, so these are callable on
  // const handles. grad() allocates a zero buffer on first use.
  bool has_grad() const { return !storage_->grad.empty(); }
  std::span<T> grad() const;
  void zero_grad() const;

  // Independent copy of shape, values and requires_grad; no gradient.
  Tensor deep_copy() const;

  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;
};

// Define-by-run record of differentiable operations. Entries are appended in
// execution order, so every entry's inputs were produced earlier (or are
// leaves); backward() replays them in exact reverse order.
template <typename T>
class Tape {
 public:
  explicit Tape(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  std::size_t size() const { return entries_.size(); }

  // True when an op over these inputs must be recorded.
  bool should_record(std::initializer_list<const Tensor<T>*> inputs) const;

  void record(std::vector<Tensor<T>> inputs, Tensor<T> output,
              std::function<void()> backward_fn);

  // Seeds d(loss)/d(loss) = 1 and propagates. Gradients of leaf tensors
  // accumulate across calls; gradients of intermediate tensors are reset at
  // the start of every call. Every requires_grad tensor seen by the tape ends
  // up with an allocated (possibly all-zero) gradient.
  void backward(Tensor<T>& loss);

  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void()> backward_fn;
  };
  bool enabled_;
  std::vector<Entry> entries_;
};

// C = alpha * op(A) * op(B) + beta * C, row-major.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc);

}  // namespace ascnet
