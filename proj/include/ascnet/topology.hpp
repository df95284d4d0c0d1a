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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ascnet/layers.hpp"
#include "ascnet/tensor.hpp"

namespace ascnet {

enum class LayerKind {
  conv2d,
  conv1d,
  maxpool,
  mfm,
  batchnorm,
  dense,
  dropout,
  activation,
  attention_pool,
  flatten,
  softmax,
};

enum class NormAxis { frequency, feature };

std::string_view to_string(LayerKind kind);

// One row of a topology. Only the fields relevant to `kind` are meaningful.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::activation;
  // False for layers the published tables leave implicit (activations,
  // the trailing softmax).
  bool tabulated = true;

  std::size_t kernel_h = 0, kernel_w = 0;  // conv2d
  std::vector<int> offsets;                // conv1d context taps
  std::size_t in_channels = 0;             // conv / dense input width, attention d
  std::size_t out_channels = 0;            // conv / dense output width
  NormAxis norm_axis = NormAxis::feature;  // batchnorm
  std::size_t norm_length = 0;             // batchnorm axis length L
  ActivationKind activation = ActivationKind::relu;
  double dropout_rate = 0.0;
  bool use_std = false;  // attention_pool
};

enum class TopologyKind { vgg, lcnn, xvector };

std::string_view to_string(TopologyKind kind);
// Accepts "vgg", "lcnn", "xvector" and "xvec".
TopologyKind parse_topology(std::string_view name);

struct TopologyOptions {
  // Divides every convolution, attention and hidden dense width. 1 gives the
  // published networks.
  std::size_t width_divisor = 1;
  std::size_t n_mels = 256;
  double dropout_rate = 0.2;
  std::size_t n_classes = 10;
};

struct NetworkSpec {
  TopologyKind kind = TopologyKind::vgg;
  std::string name;
  TopologyOptions options;
  std::vector<LayerSpec> layers;

  bool is_2d() const { return kind != TopologyKind::xvector; }
  // Per-example input shape for a segment of n_frames frames:
  // (n_mels, n_frames, 1) for 2D networks, (n_frames, n_mels) for x-vector.
  Shape input_shape(std::size_t n_frames) const;
};

NetworkSpec build_vgg(const TopologyOptions& options = {});
NetworkSpec build_lcnn(const TopologyOptions& options = {});
NetworkSpec build_xvector(const TopologyOptions& options = {});
NetworkSpec build_topology(TopologyKind kind, const TopologyOptions& options = {});

// Closed-form trainable-plus-statistics parameter count of one layer:
// conv = kh*kw*Cin*Cout + Cout, dense = din*dout + dout, batchnorm = 4L,
// attention = d^2 + 2d, everything else 0.
std::size_t param_count(const LayerSpec& layer);

struct ParamCountReport {
  std::vector<std::size_t> per_layer;  // aligned with spec.layers
  std::size_t total = 0;
};
ParamCountReport param_count(const NetworkSpec& spec);

// Per-example output shape of every layer for an input of n_frames frames.
// Throws DimensionError when consecutive layers do not chain.
std::vector<Shape> propagate_shapes(const NetworkSpec& spec, std::size_t n_frames);

// Output shape of a single layer given its per-example input shape.
Shape layer_output_shape(const LayerSpec& layer, const Shape& in);

// Stable 64-bit FNV-1a digest of the canonical text form of a NetworkSpec.
std::uint64_t spec_hash(const NetworkSpec& spec);
std::string canonical_text(const NetworkSpec& spec);

// One row of the shipped deviation ledger (data/deviations.tsv): a table
// cell that the built network intentionally does not reproduce.
struct DeviationEntry {
  std::string network;  // vgg | lcnn | xvector
  std::string layer;
  std::string column;  // params | output
  std::string table_value;
  std::string computed_value;
  std::string reason;
};

// Tab-separated with a header line. Throws FormatError on malformed rows.
std::vector<DeviationEntry> read_deviation_ledger(std::istream& in);
std::vector<DeviationEntry> read_deviation_ledger(const std::filesystem::path& path);

}  // namespace ascnet
