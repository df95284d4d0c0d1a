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

#include "ascnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ascnet {
namespace {

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " input, got " + shape_str(shape));
  }
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

// (outer, length, inner) view of a tensor around one axis.
struct AxisView {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

// Rows of the im2col matrix are processed in chunks of at most this many
// elements to bound scratch memory on long inputs.
constexpr std::size_t kColChunkElems = std::size_t{1} << 22;

// Fills col[(fr * T + t) * (kh*kw*C) + (i*kw + j) * C + c] for frequency rows
// [f0, f1) of one example.
template <typename T>
void im2col_2d(const T* x, std::size_t F, std::size_t Tn, std::size_t C, std::size_t kh,
               std::size_t kw, std::size_t f0, std::size_t f1, T* col) {
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw / 2);
  const std::size_t row_len = kh * kw * C;
  for (std::size_t f = f0; f < f1; ++f) {
    for (std::size_t t = 0; t < Tn; ++t) {
      T* dst = col + ((f - f0) * Tn + t) * row_len;
      for (std::size_t i = 0; i < kh; ++i) {
        const std::ptrdiff_t sf = static_cast<std::ptrdiff_t>(f + i) - ph;
        for (std::size_t j = 0; j < kw; ++j) {
          const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t + j) - pw;
          T* d = dst + (i * kw + j) * C;
          if (sf < 0 || sf >= static_cast<std::ptrdiff_t>(F) || st < 0 ||
              st >= static_cast<std::ptrdiff_t>(Tn)) {
            std::fill(d, d + C, T(0));
          } else {
            const T* s = x + (static_cast<std::size_t>(sf) * Tn + static_cast<std::size_t>(st)) * C;
            std::copy(s, s + C, d);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_2d(const T* col, std::size_t F, std::size_t Tn, std::size_t C, std::size_t kh,
               std::size_t kw, std::size_t f0, std::size_t f1, T* dx) {
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw / 2);
  const std::size_t row_len = kh * kw * C;
  for (std::size_t f = f0; f < f1; ++f) {
    for (std::size_t t = 0; t < Tn; ++t) {
      const T* src = col + ((f - f0) * Tn + t) * row_len;
      for (std::size_t i = 0; i < kh; ++i) {
        const std::ptrdiff_t sf = static_cast<std::ptrdiff_t>(f + i) - ph;
        if (sf < 0 || sf >= static_cast<std::ptrdiff_t>(F)) continue;
        for (std::size_t j = 0; j < kw; ++j) {
          const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t + j) - pw;
          if (st < 0 || st >= static_cast<std::ptrdiff_t>(Tn)) continue;
          const T* s = src + (i * kw + j) * C;
          T* d = dx + (static_cast<std::size_t>(sf) * Tn + static_cast<std::size_t>(st)) * C;
          for (std::size_t c = 0; c < C; ++c) d[c] += s[c];
        }
      }
    }
  }
}

template <typename T>
void im2col_1d(const T* x, std::size_t Tn, std::size_t C, std::span<const int> offsets,
               std::size_t t0, std::size_t t1, T* col) {
  const std::size_t row_len = offsets.size() * C;
  for (std::size_t t = t0; t < t1; ++t) {
    T* dst = col + (t - t0) * row_len;
    for (std::size_t o = 0; o < offsets.size(); ++o) {
      const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t) + offsets[o];
      T* d = dst + o * C;
      if (st < 0 || st >= static_cast<std::ptrdiff_t>(Tn)) {
        std::fill(d, d + C, T(0));
      } else {
        const T* s = x + static_cast<std::size_t>(st) * C;
        std::copy(s, s + C, d);
      }
    }
  }
}

template <typename T>
void col2im_1d(const T* col, std::size_t Tn, std::size_t C, std::span<const int> offsets,
               std::size_t t0, std::size_t t1, T* dx) {
  const std::size_t row_len = offsets.size() * C;
  for (std::size_t t = t0; t < t1; ++t) {
    const T* src = col + (t - t0) * row_len;
    for (std::size_t o = 0; o < offsets.size(); ++o) {
      const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t) + offsets[o];
      if (st < 0 || st >= static_cast<std::ptrdiff_t>(Tn)) continue;
      const T* s = src + o * C;
      T* d = dx + static_cast<std::size_t>(st) * C;
      for (std::size_t c = 0; c < C; ++c) d[c] += s[c];
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c(Shape{m, n});
  gemm<T>(false, false, m, n, k, T(1), a.data().data(), k, b.data().data(), n, T(0),
          c.data().data(), n);
  if (tape.should_record({&a, &b})) {
    tape.record({a, b}, c, [a, b, c, m, n, k]() mutable {
      const T* dc = c.grad().data();
      if (a.requires_grad()) {
        gemm<T>(false, true, m, k, n, T(1), dc, n, b.data().data(), n, T(1), a.grad().data(), k);
      }
      if (b.requires_grad()) {
        gemm<T>(true, false, k, n, m, T(1), a.data().data(), k, dc, n, T(1), b.grad().data(), n);
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t n = bias.size();
  if (bias.rank() != 1 || x.shape().back() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match input " +
                         shape_str(x.shape()));
  }
  Tensor<T> y(x.shape());
  const std::size_t rows = x.size() / n;
  auto xd = x.data();
  auto bd = bias.data();
  auto yd = y.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) yd[r * n + j] = xd[r * n + j] + bd[j];
  }
  if (tape.should_record({&x, &bias})) {
    tape.record({x, bias}, y, [x, bias, y, rows, n]() mutable {
      auto dy = y.grad();
      if (x.requires_grad()) {
        auto dx = x.grad();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      }
      if (bias.requires_grad()) {
        auto db = bias.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < n; ++j) db[j] += dy[r * n + j];
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  if (tape.should_record({&a, &b})) {
    tape.record({a, b}, y, [a, b, y]() mutable {
      auto dy = y.grad();
      for (const Tensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto g = t->grad();
        for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  if (tape.should_record({&a, &b})) {
    tape.record({a, b}, y, [a, b, y]() mutable {
      auto dy = y.grad();
      // Accumulate through locals so a == b (x * x) sees both contributions.
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * b[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < dy.size(); ++i) gb[i] += dy[i] * a[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.data()) total += v;
  Tensor<T> y = Tensor<T>::scalar(total);
  if (tape.should_record({&x})) {
    tape.record({x}, y, [x, y]() mutable {
      const T g = y.grad()[0];
      auto dx = x.grad();
      for (auto& d : dx) d += g;
    });
  }
  return y;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  if (tape.should_record({&x})) {
    tape.record({x}, y, [x, y]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) {
        if (x[i] > T(0)) dx[i] += dy[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> leaky_relu(Tape<T>& tape, const Tensor<T>& x, T slope) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
  if (tape.should_record({&x})) {
    tape.record({x}, y, [x, y, slope]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += x[i] > T(0) ? dy[i] : slope * dy[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x[i]);
  if (tape.should_record({&x})) {
    tape.record({x}, y, [x, y]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * (T(1) - y[i] * y[i]);
    });
  }
  return y;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  Tensor<T> y(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  if (tape.should_record({&x})) {
    tape.record({x}, y, [x, y]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> mean_axis(Tape<T>& tape, const Tensor<T>& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  Tensor<T> y(out_shape);
  const T inv = T(1) / static_cast<T>(v.length);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t l = 0; l < v.length; ++l) {
      const T* src = x.data().data() + (o * v.length + l) * v.inner;
      T* dst = y.data().data() + o * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
    }
  }
  for (auto& d : y.data()) d *= inv;
  if (tape.should_record({&x})) {
    tape.record({x}, y, [x, y, v, inv]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t l = 0; l < v.length; ++l) {
          for (std::size_t i = 0; i < v.inner; ++i) {
            dx[(o * v.length + l) * v.inner + i] += dy[o * v.inner + i] * inv;
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> out(logits.size());
  if (logits.empty()) return out;
  const T mx = *std::max_element(logits.begin(), logits.end());
  T z = T(0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (auto& o : out) o /= z;
  return out;
}

template <typename T>
Tensor<T> softmax_rows(Tape<T>& tape, const Tensor<T>& x) {
  require_rank(x.shape(), 2, "softmax_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    auto p = softmax<T>(x.data().subspan(r * cols, cols));
    std::copy(p.begin(), p.end(), y.data().begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  if (tape.should_record({&x})) {
    tape.record({x}, y, [x, y, rows, cols]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        T dot = T(0);
        for (std::size_t c = 0; c < cols; ++c) dot += dy[r * cols + c] * y[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) {
          dx[r * cols + c] += y[r * cols + c] * (dy[r * cols + c] - dot);
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                std::span<const int> targets) {
  require_rank(logits.shape(), 2, "softmax_cross_entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for batch of " + std::to_string(batch));
  }
  for (T v : logits.data()) {
    if (!std::isfinite(v)) throw NumericError("softmax_cross_entropy: non-finite logit");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw IndexError("softmax_cross_entropy: target " + std::to_string(t) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
  std::vector<T> probs(batch * classes);
  T loss = T(0);
  for (std::size_t b = 0; b < batch; ++b) {
    auto row = logits.data().subspan(b * classes, classes);
    const T mx = *std::max_element(row.begin(), row.end());
    T z = T(0);
    for (T v : row) z += std::exp(v - mx);
    const T log_z = mx + std::log(z);
    loss += log_z - row[static_cast<std::size_t>(targets[b])];
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] = std::exp(row[c] - log_z);
  }
  Tensor<T> y = Tensor<T>::scalar(loss / static_cast<T>(batch));
  if (tape.should_record({&logits})) {
    std::vector<int> tgt(targets.begin(), targets.end());
    tape.record({logits}, y,
                [logits, y, probs = std::move(probs), tgt = std::move(tgt), batch,
                 classes]() mutable {
                  const T g = y.grad()[0] / static_cast<T>(batch);
                  auto dx = logits.grad();
                  for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t c = 0; c < classes; ++c) {
                      const T onehot = static_cast<int>(c) == tgt[b] ? T(1) : T(0);
                      dx[b * classes + c] += g * (probs[b * classes + c] - onehot);
                    }
                  }
                });
  }
  return y;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& kernel,
                 const Tensor<T>& bias) {
  require_rank(x.shape(), 4, "conv2d");
  require_rank(kernel.shape(), 4, "conv2d kernel");
  const std::size_t B = x.dim(0), F = x.dim(1), Tn = x.dim(2), Cin = x.dim(3);
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1), Cout = kernel.dim(3);
  if (kernel.dim(2) != Cin) {
    throw DimensionError("conv2d: input has " + std::to_string(Cin) + " channels, kernel " +
                         shape_str(kernel.shape()) + " expects " +
                         std::to_string(kernel.dim(2)));
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw DimensionError("conv2d: same padding needs odd kernel sizes, got " +
                         shape_str(kernel.shape()));
  }
  if (bias.size() != Cout) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " for " +
                         std::to_string(Cout) + " output channels");
  }
  const std::size_t row_len = kh * kw * Cin;
  const bool pointwise = kh == 1 && kw == 1;
  const std::size_t chunk_rows = std::max<std::size_t>(1, kColChunkElems / (Tn * row_len));

  Tensor<T> y(Shape{B, F, Tn, Cout});
  std::vector<T> col;
  if (!pointwise) col.resize(std::min(chunk_rows, F) * Tn * row_len);
  for (std::size_t b = 0; b < B; ++b) {
    const T* xb = x.data().data() + b * F * Tn * Cin;
    T* yb = y.data().data() + b * F * Tn * Cout;
    for (std::size_t f0 = 0; f0 < F; f0 += chunk_rows) {
      const std::size_t f1 = std::min(F, f0 + chunk_rows);
      const std::size_t rows = (f1 - f0) * Tn;
      const T* a = xb + f0 * Tn * Cin;
      if (!pointwise) {
        im2col_2d(xb, F, Tn, Cin, kh, kw, f0, f1, col.data());
        a = col.data();
      }
      T* out = yb + f0 * Tn * Cout;
      for (std::size_t r = 0; r < rows; ++r) std::copy_n(bias.data().data(), Cout, out + r * Cout);
      gemm<T>(false, false, rows, Cout, row_len, T(1), a, row_len, kernel.data().data(), Cout,
              T(1), out, Cout);
    }
  }

  if (tape.should_record({&x, &kernel, &bias})) {
    tape.record({x, kernel, bias}, y,
                [x, kernel, bias, y, B, F, Tn, Cin, Cout, kh, kw, row_len, pointwise,
                 chunk_rows]() mutable {
                  auto dy = y.grad();
                  if (bias.requires_grad()) {
                    auto db = bias.grad();
                    for (std::size_t r = 0; r < dy.size() / Cout; ++r) {
                      for (std::size_t c = 0; c < Cout; ++c) db[c] += dy[r * Cout + c];
                    }
                  }
                  const bool need_dk = kernel.requires_grad();
                  const bool need_dx = x.requires_grad();
                  if (!need_dk && !need_dx) return;
                  T* dk = need_dk ? kernel.grad().data() : nullptr;
                  T* dx = need_dx ? x.grad().data() : nullptr;
                  std::vector<T> col, dcol;
                  if (!pointwise) {
                    col.resize(std::min(chunk_rows, F) * Tn * row_len);
                    if (need_dx) dcol.resize(col.size());
                  }
                  for (std::size_t b = 0; b < B; ++b) {
                    const T* xb = x.data().data() + b * F * Tn * Cin;
                    const T* dyb = dy.data() + b * F * Tn * Cout;
                    T* dxb = need_dx ? dx + b * F * Tn * Cin : nullptr;
                    for (std::size_t f0 = 0; f0 < F; f0 += chunk_rows) {
                      const std::size_t f1 = std::min(F, f0 + chunk_rows);
                      const std::size_t rows = (f1 - f0) * Tn;
                      const T* g = dyb + f0 * Tn * Cout;
                      if (pointwise) {
                        if (need_dk) {
                          gemm<T>(true, false, Cin, Cout, rows, T(1), xb + f0 * Tn * Cin, Cin, g,
                                  Cout, T(1), dk, Cout);
                        }
                        if (need_dx) {
                          gemm<T>(false, true, rows, Cin, Cout, T(1), g, Cout,
                                  kernel.data().data(), Cout, T(1), dxb + f0 * Tn * Cin, Cin);
                        }
                        continue;
                      }
                      if (need_dk) {
                        im2col_2d(xb, F, Tn, Cin, kh, kw, f0, f1, col.data());
                        gemm<T>(true, false, row_len, Cout, rows, T(1), col.data(), row_len, g,
                                Cout, T(1), dk, Cout);
                      }
                      if (need_dx) {
                        gemm<T>(false, true, rows, row_len, Cout, T(1), g, Cout,
                                kernel.data().data(), Cout, T(0), dcol.data(), row_len);
                        col2im_2d(dcol.data(), F, Tn, Cin, kh, kw, f0, f1, dxb);
                      }
                    }
                  }
                });
  }
  return y;
}

template <typename T>
Tensor<T> conv1d_ctx(Tape<T>& tape, const Tensor<T>& x, std::span<const int> offsets,
                     const Tensor<T>& weights, const Tensor<T>& bias) {
  if (offsets.empty()) throw ConfigError("conv1d_ctx: empty offset list");
  require_rank(x.shape(), 3, "conv1d_ctx");
  require_rank(weights.shape(), 3, "conv1d_ctx weights");
  const std::size_t B = x.dim(0), Tn = x.dim(1), Cin = x.dim(2);
  const std::size_t n_off = offsets.size(), Cout = weights.dim(2);
  if (weights.dim(0) != n_off || weights.dim(1) != Cin) {
    throw DimensionError("conv1d_ctx: weights " + shape_str(weights.shape()) + " do not match " +
                         std::to_string(n_off) + " offsets and input " + shape_str(x.shape()));
  }
  if (bias.size() != Cout) {
    throw DimensionError("conv1d_ctx: bias " + shape_str(bias.shape()) + " for " +
                         std::to_string(Cout) + " output channels");
  }
  const std::size_t row_len = n_off * Cin;
  const std::size_t chunk = std::max<std::size_t>(1, kColChunkElems / row_len);
  std::vector<int> offs(offsets.begin(), offsets.end());

  Tensor<T> y(Shape{B, Tn, Cout});
  std::vector<T> col(std::min(chunk, Tn) * row_len);
  for (std::size_t b = 0; b < B; ++b) {
    const T* xb = x.data().data() + b * Tn * Cin;
    T* yb = y.data().data() + b * Tn * Cout;
    for (std::size_t t0 = 0; t0 < Tn; t0 += chunk) {
      const std::size_t t1 = std::min(Tn, t0 + chunk);
      im2col_1d<T>(xb, Tn, Cin, offs, t0, t1, col.data());
      T* out = yb + t0 * Cout;
      for (std::size_t r = 0; r < t1 - t0; ++r) std::copy_n(bias.data().data(), Cout, out + r * Cout);
      gemm<T>(false, false, t1 - t0, Cout, row_len, T(1), col.data(), row_len,
              weights.data().data(), Cout, T(1), out, Cout);
    }
  }

  if (tape.should_record({&x, &weights, &bias})) {
    tape.record({x, weights, bias}, y,
                [x, weights, bias, y, offs, B, Tn, Cin, Cout, row_len, chunk]() mutable {
                  auto dy = y.grad();
                  if (bias.requires_grad()) {
                    auto db = bias.grad();
                    for (std::size_t r = 0; r < B * Tn; ++r) {
                      for (std::size_t c = 0; c < Cout; ++c) db[c] += dy[r * Cout + c];
                    }
                  }
                  const bool need_dw = weights.requires_grad();
                  const bool need_dx = x.requires_grad();
                  if (!need_dw && !need_dx) return;
                  T* dw = need_dw ? weights.grad().data() : nullptr;
                  T* dx = need_dx ? x.grad().data() : nullptr;
                  std::vector<T> col(std::min(chunk, Tn) * row_len);
                  std::vector<T> dcol(need_dx ? col.size() : 0);
                  for (std::size_t b = 0; b < B; ++b) {
                    const T* xb = x.data().data() + b * Tn * Cin;
                    const T* dyb = dy.data() + b * Tn * Cout;
                    for (std::size_t t0 = 0; t0 < Tn; t0 += chunk) {
                      const std::size_t t1 = std::min(Tn, t0 + chunk);
                      const std::size_t rows = t1 - t0;
                      const T* g = dyb + t0 * Cout;
                      if (need_dw) {
                        im2col_1d<T>(xb, Tn, Cin, offs, t0, t1, col.data());
                        gemm<T>(true, false, row_len, Cout, rows, T(1), col.data(), row_len, g,
                                Cout, T(1), dw, Cout);
                      }
                      if (need_dx) {
                        gemm<T>(false, true, rows, row_len, Cout, T(1), g, Cout,
                                weights.data().data(), Cout, T(0), dcol.data(), row_len);
                        col2im_1d<T>(dcol.data(), Tn, Cin, offs, t0, t1, dx + b * Tn * Cin);
                      }
                    }
                  }
                });
  }
  return y;
}

template <typename T>
Tensor<T> maxpool_freq(Tape<T>& tape, const Tensor<T>& x) {
  require_rank(x.shape(), 4, "maxpool_freq");
  const std::size_t B = x.dim(0), F = x.dim(1), Tn = x.dim(2), C = x.dim(3);
  if (F % 2 != 0) {
    throw DimensionError("maxpool_freq: odd frequency axis in " + shape_str(x.shape()));
  }
  const std::size_t row = Tn * C;  // elements per frequency row
  Tensor<T> y(Shape{B, F / 2, Tn, C});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F / 2; ++f) {
      const T* lo = x.data().data() + (b * F + 2 * f) * row;
      const T* hi = lo + row;
      T* out = y.data().data() + (b * (F / 2) + f) * row;
      for (std::size_t i = 0; i < row; ++i) out[i] = lo[i] >= hi[i] ? lo[i] : hi[i];
    }
  }
  if (tape.should_record({&x})) {
    tape.record({x}, y, [x, y, B, F, row]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t f = 0; f < F / 2; ++f) {
          const std::size_t lo = (b * F + 2 * f) * row;
          const std::size_t hi = lo + row;
          const std::size_t o = (b * (F / 2) + f) * row;
          for (std::size_t i = 0; i < row; ++i) {
            if (x[lo + i] >= x[hi + i]) {
              dx[lo + i] += dy[o + i];
            } else {
              dx[hi + i] += dy[o + i];
            }
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> mfm(Tape<T>& tape, const Tensor<T>& x) {
  const std::size_t C = x.shape().back();
  if (C % 2 != 0) {
    throw DimensionError("mfm: odd channel count in " + shape_str(x.shape()));
  }
  const std::size_t half = C / 2;
  const std::size_t cells = x.size() / C;
  Shape out_shape = x.shape();
  out_shape.back() = half;
  Tensor<T> y(out_shape);
  for (std::size_t p = 0; p < cells; ++p) {
    const T* in = x.data().data() + p * C;
    T* out = y.data().data() + p * half;
    for (std::size_t i = 0; i < half; ++i) out[i] = in[i] >= in[i + half] ? in[i] : in[i + half];
  }
  if (tape.should_record({&x})) {
    tape.record({x}, y, [x, y, cells, C, half]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      for (std::size_t p = 0; p < cells; ++p) {
        for (std::size_t i = 0; i < half; ++i) {
          const std::size_t a = p * C + i;
          dx[x[a] >= x[a + half] ? a : a + half] += dy[p * half + i];
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> batchnorm(Tape<T>& tape, const Tensor<T>& x, std::size_t axis, const Tensor<T>& gamma,
                    const Tensor<T>& beta, std::span<T> running_mean, std::span<T> running_var,
                    Mode mode, T momentum, T eps) {
  const AxisView v = axis_view(x.shape(), axis);
  const std::size_t L = v.length;
  if (gamma.size() != L || beta.size() != L || running_mean.size() != L ||
      running_var.size() != L) {
    throw DimensionError("batchnorm: parameters of length " + std::to_string(gamma.size()) +
                         " for axis of length " + std::to_string(L) + " in " +
                         shape_str(x.shape()));
  }
  const std::size_t count = v.outer * v.inner;
  if (mode == Mode::train && count == 0) throw InputError("batchnorm: empty batch in train mode");

  std::vector<T> mean(L), inv_std(L);
  if (mode == Mode::train) {
    std::vector<T> var(L, T(0));
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t l = 0; l < L; ++l) {
        const T* s = x.data().data() + (o * L + l) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) mean[l] += s[i];
      }
    }
    for (auto& m : mean) m /= static_cast<T>(count);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t l = 0; l < L; ++l) {
        const T* s = x.data().data() + (o * L + l) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) {
          const T d = s[i] - mean[l];
          var[l] += d * d;
        }
      }
    }
    for (std::size_t l = 0; l < L; ++l) {
      var[l] /= static_cast<T>(count);
      inv_std[l] = T(1) / std::sqrt(var[l] + eps);
      const T unbiased = count > 1 ? var[l] * static_cast<T>(count) / static_cast<T>(count - 1)
                                   : var[l];
      running_mean[l] = momentum * running_mean[l] + (T(1) - momentum) * mean[l];
      running_var[l] = momentum * running_var[l] + (T(1) - momentum) * unbiased;
    }
  } else {
    for (std::size_t l = 0; l < L; ++l) {
      mean[l] = running_mean[l];
      inv_std[l] = T(1) / std::sqrt(running_var[l] + eps);
    }
  }

  Tensor<T> y(x.shape());
  std::vector<T> xhat(x.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t base = (o * L + l) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) {
        xhat[base + i] = (x[base + i] - mean[l]) * inv_std[l];
        y[base + i] = gamma[l] * xhat[base + i] + beta[l];
      }
    }
  }

  if (tape.should_record({&x, &gamma, &beta})) {
    tape.record({x, gamma, beta}, y,
                [x, gamma, beta, y, v, L, count, mode, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)]() mutable {
                  auto dy = y.grad();
                  std::vector<T> sum_dy(L, T(0)), sum_dy_xhat(L, T(0));
                  for (std::size_t o = 0; o < v.outer; ++o) {
                    for (std::size_t l = 0; l < L; ++l) {
                      const std::size_t base = (o * L + l) * v.inner;
                      for (std::size_t i = 0; i < v.inner; ++i) {
                        sum_dy[l] += dy[base + i];
                        sum_dy_xhat[l] += dy[base + i] * xhat[base + i];
                      }
                    }
                  }
                  if (gamma.requires_grad()) {
                    auto dg = gamma.grad();
                    for (std::size_t l = 0; l < L; ++l) dg[l] += sum_dy_xhat[l];
                  }
                  if (beta.requires_grad()) {
                    auto db = beta.grad();
                    for (std::size_t l = 0; l < L; ++l) db[l] += sum_dy[l];
                  }
                  if (!x.requires_grad()) return;
                  auto dx = x.grad();
                  const T n = static_cast<T>(count);
                  for (std::size_t o = 0; o < v.outer; ++o) {
                    for (std::size_t l = 0; l < L; ++l) {
                      const std::size_t base = (o * L + l) * v.inner;
                      const T scale = gamma[l] * inv_std[l];
                      for (std::size_t i = 0; i < v.inner; ++i) {
                        if (mode == Mode::train) {
                          dx[base + i] += scale * (dy[base + i] - sum_dy[l] / n -
                                                   xhat[base + i] * sum_dy_xhat[l] / n);
                        } else {
                          dx[base + i] += scale * dy[base + i];
                        }
                      }
                    }
                  }
                });
  }
  return y;
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate, Mode mode, CounterRng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::infer || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.size());
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.uniform() >= rate ? keep_scale : T(0);
    y[i] = x[i] * mask[i];
  }
  if (tape.should_record({&x})) {
    tape.record({x}, y, [x, y, mask = std::move(mask)]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * mask[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> weighted_stats(Tape<T>& tape, const Tensor<T>& h, const Tensor<T>& w, bool use_std,
                         T eps) {
  require_rank(h.shape(), 4, "weighted_stats");
  require_rank(w.shape(), 2, "weighted_stats weights");
  const std::size_t B = h.dim(0), F = h.dim(1), Tn = h.dim(2), C = h.dim(3);
  if (w.dim(0) != B || w.dim(1) != Tn) {
    throw DimensionError("weighted_stats: weights " + shape_str(w.shape()) +
                         " do not match input " + shape_str(h.shape()));
  }
  const std::size_t out_c = use_std ? 2 * C : C;
  Tensor<T> y(Shape{B, F, out_c});
  // mu, S = sum_t w_t (h_t - mu), and std per (b, f, c).
  std::vector<T> mu(B * F * C, T(0)), corr(use_std ? B * F * C : 0), sd(use_std ? B * F * C : 0);
  auto hat = [&](std::size_t b, std::size_t f, std::size_t t) {
    return h.data().data() + ((b * F + f) * Tn + t) * C;
  };
  for (std::size_t b = 0; b < B; ++b) {
    T wsum = T(0);
    for (std::size_t t = 0; t < Tn; ++t) wsum += w[b * Tn + t];
    for (std::size_t f = 0; f < F; ++f) {
      T* m = mu.data() + (b * F + f) * C;
      for (std::size_t t = 0; t < Tn; ++t) {
        const T wt = w[b * Tn + t];
        const T* ht = hat(b, f, t);
        for (std::size_t c = 0; c < C; ++c) m[c] += wt * ht[c];
      }
      T* out = y.data().data() + (b * F + f) * out_c;
      std::copy(m, m + C, out);
      if (!use_std) continue;
      std::vector<T> var(C, T(0));
      for (std::size_t t = 0; t < Tn; ++t) {
        const T wt = w[b * Tn + t];
        const T* ht = hat(b, f, t);
        for (std::size_t c = 0; c < C; ++c) {
          const T d = ht[c] - m[c];
          var[c] += wt * d * d;
        }
      }
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t k = (b * F + f) * C + c;
        corr[k] = m[c] * (T(1) - wsum);
        sd[k] = std::sqrt(var[c] + eps);
        out[C + c] = sd[k];
      }
    }
  }

  if (tape.should_record({&h, &w})) {
    tape.record({h, w}, y,
                [h, w, y, B, F, Tn, C, out_c, use_std, mu = std::move(mu),
                 corr = std::move(corr), sd = std::move(sd)]() mutable {
                  auto dy = y.grad();
                  T* dh = h.requires_grad() ? h.grad().data() : nullptr;
                  T* dw = w.requires_grad() ? w.grad().data() : nullptr;
                  for (std::size_t b = 0; b < B; ++b) {
                    for (std::size_t f = 0; f < F; ++f) {
                      const T* g = dy.data() + (b * F + f) * out_c;
                      const std::size_t k0 = (b * F + f) * C;
                      for (std::size_t t = 0; t < Tn; ++t) {
                        const T wt = w[b * Tn + t];
                        const std::size_t off = ((b * F + f) * Tn + t) * C;
                        const T* ht = h.data().data() + off;
                        T acc_w = T(0);
                        for (std::size_t c = 0; c < C; ++c) {
                          const T gm = g[c];
                          const T m = mu[k0 + c];
                          if (!use_std) {
                            if (dh) dh[off + c] += wt * gm;
                            acc_w += gm * ht[c];
                            continue;
                          }
                          const T gs = g[C + c] / sd[k0 + c];
                          const T d = ht[c] - m;
                          if (dh) dh[off + c] += wt * (gm + gs * (d - corr[k0 + c]));
                          acc_w += gm * ht[c] + T(0.5) * gs * (d * d - T(2) * ht[c] * corr[k0 + c]);
                        }
                        if (dw) dw[b * Tn + t] += acc_w;
                      }
                    }
                  }
                });
  }
  return y;
}

// ---------------------------------------------------------------------------

#define ASCNET_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> add_bias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                         \
  template Tensor<T> leaky_relu(Tape<T>&, const Tensor<T>&, T);                                \
  template Tensor<T> tanh(Tape<T>&, const Tensor<T>&);                                         \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                               \
  template Tensor<T> mean_axis(Tape<T>&, const Tensor<T>&, std::size_t);                       \
  template Tensor<T> softmax_rows(Tape<T>&, const Tensor<T>&);                                 \
  template Tensor<T> softmax_cross_entropy(Tape<T>&, const Tensor<T>&, std::span<const int>);  \
  template std::vector<T> softmax(std::span<const T>);                                         \
  template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> conv1d_ctx(Tape<T>&, const Tensor<T>&, std::span<const int>,              \
                                const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> maxpool_freq(Tape<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mfm(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T> batchnorm(Tape<T>&, const Tensor<T>&, std::size_t, const Tensor<T>&,      \
                               const Tensor<T>&, std::span<T>, std::span<T>, Mode, T, T);      \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, Mode, CounterRng&);           \
  template Tensor<T> weighted_stats(Tape<T>&, const Tensor<T>&, const Tensor<T>&, bool, T);

ASCNET_INSTANTIATE_OPS(float)
ASCNET_INSTANTIATE_OPS(double)

}  // namespace ascnet
