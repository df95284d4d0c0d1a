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

#include "ascnet/topology.hpp"

#include "ascnet/errors.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace ascnet {
namespace {

std::size_t scaled(std::size_t width, const TopologyOptions& o) {
  if (o.width_divisor == 0 || width % o.width_divisor != 0) {
    throw ConfigError("width " + std::to_string(width) + " is not divisible by width_divisor " +
                      std::to_string(o.width_divisor));
  }
  return width / o.width_divisor;
}

LayerSpec conv2d_layer(std::string name, std::size_t k, std::size_t in, std::size_t out) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::conv2d;
  l.kernel_h = l.kernel_w = k;
  l.in_channels = in;
  l.out_channels = out;
  return l;
}

LayerSpec simple_layer(std::string name, LayerKind kind, bool tabulated = true) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = kind;
  l.tabulated = tabulated;
  return l;
}

LayerSpec activation_layer(std::string name, ActivationKind act) {
  LayerSpec l = simple_layer(std::move(name), LayerKind::activation, false);
  l.activation = act;
  return l;
}

LayerSpec batchnorm_layer(std::string name, NormAxis axis, std::size_t length) {
  LayerSpec l = simple_layer(std::move(name), LayerKind::batchnorm);
  l.norm_axis = axis;
  l.norm_length = length;
  return l;
}

LayerSpec dense_layer(std::string name, std::size_t in, std::size_t out) {
  LayerSpec l = simple_layer(std::move(name), LayerKind::dense);
  l.in_channels = in;
  l.out_channels = out;
  return l;
}

LayerSpec attention_layer(std::size_t d, bool use_std) {
  LayerSpec l = simple_layer("AttentionPooling", LayerKind::attention_pool);
  l.in_channels = d;
  l.use_std = use_std;
  return l;
}

// Attention, flatten and the three dense layers shared by VGG and LCNN.
void append_2d_head(NetworkSpec& spec, std::size_t channels, std::size_t freq_bins) {
  const TopologyOptions& o = spec.options;
  spec.layers.push_back(attention_layer(channels, false));
  spec.layers.push_back(simple_layer("Flatten", LayerKind::flatten));
  const std::size_t hidden = scaled(256, o);
  spec.layers.push_back(dense_layer("Dense1", freq_bins * channels, hidden));
  spec.layers.push_back(activation_layer("ReLU-d1", ActivationKind::relu));
  spec.layers.push_back(dense_layer("Dense2", hidden, hidden));
  spec.layers.push_back(activation_layer("ReLU-d2", ActivationKind::relu));
  spec.layers.push_back(dense_layer("Dense (softmax)", hidden, o.n_classes));
  spec.layers.push_back(simple_layer("Softmax", LayerKind::softmax, false));
}

void require_poolable(const TopologyOptions& o) {
  if (o.n_mels == 0 || o.n_mels % 64 != 0) {
    throw ConfigError("2D topologies halve the frequency axis six times; n_mels=" +
                      std::to_string(o.n_mels) + " is not a multiple of 64");
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::mfm: return "mfm";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::activation: return "activation";
    case LayerKind::attention_pool: return "attention_pool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::vgg: return "vgg";
    case TopologyKind::lcnn: return "lcnn";
    case TopologyKind::xvector: return "xvector";
  }
  return "?";
}

TopologyKind parse_topology(std::string_view name) {
  if (name == "vgg") return TopologyKind::vgg;
  if (name == "lcnn") return TopologyKind::lcnn;
  if (name == "xvector" || name == "xvec") return TopologyKind::xvector;
  throw ConfigError("unknown topology '" + std::string(name) + "' (expected vgg, lcnn or xvec)");
}

Shape NetworkSpec::input_shape(std::size_t n_frames) const {
  if (is_2d()) return {options.n_mels, n_frames, 1};
  return {n_frames, options.n_mels};
}

NetworkSpec build_vgg(const TopologyOptions& options) {
  require_poolable(options);
  NetworkSpec spec;
  spec.kind = TopologyKind::vgg;
  spec.name = "vgg";
  spec.options = options;
  const std::array<std::size_t, 6> widths{32, 64, 128, 256, 256, 256};
  std::size_t in = 1;
  for (std::size_t blk = 0; blk < widths.size(); ++blk) {
    const std::size_t c = scaled(widths[blk], options);
    const std::string id = std::to_string(blk + 1);
    spec.layers.push_back(conv2d_layer("Conv2D-" + id + "-1", 3, in, c));
    spec.layers.push_back(activation_layer("ReLU-" + id + "-1", ActivationKind::relu));
    spec.layers.push_back(conv2d_layer("Conv2D-" + id + "-2", 3, c, c));
    spec.layers.push_back(activation_layer("ReLU-" + id + "-2", ActivationKind::relu));
    spec.layers.push_back(simple_layer("MaxPooling-" + id, LayerKind::maxpool));
    in = c;
  }
  append_2d_head(spec, in, options.n_mels / 64);
  return spec;
}

NetworkSpec build_lcnn(const TopologyOptions& options) {
  require_poolable(options);
  NetworkSpec spec;
  spec.kind = TopologyKind::lcnn;
  spec.name = "lcnn";
  spec.options = options;
  auto s = [&](std::size_t w) { return scaled(w, options); };
  auto conv_mfm = [&](const std::string& id, std::size_t k, std::size_t in, std::size_t out) {
    spec.layers.push_back(conv2d_layer("Conv2D-" + id, k, in, out));
    spec.layers.push_back(simple_layer("MFM-" + id, LayerKind::mfm));
    return out / 2;
  };
  auto pool = [&](int blk) {
    spec.layers.push_back(simple_layer("MaxPooling-" + std::to_string(blk), LayerKind::maxpool));
  };
  auto norm = [&](int idx, std::size_t freq) {
    spec.layers.push_back(
        batchnorm_layer("BatchNorm-" + std::to_string(idx), NormAxis::frequency, freq));
  };

  std::size_t freq = options.n_mels;
  std::size_t c = conv_mfm("1-1", 5, 1, s(32));
  pool(1);
  freq /= 2;
  // Blocks 2..6: 1x1 conv + MFM + frequency batchnorm, 3x3 conv + MFM, pool.
  struct Block {
    std::size_t pointwise_out, spatial_out;
  };
  const std::array<Block, 5> blocks{{{32, 64}, {64, 128}, {96, 128}, {128, 160}, {192, 192}}};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string id = std::to_string(i + 2);
    c = conv_mfm(id + "-1", 1, c, s(blocks[i].pointwise_out));
    norm(static_cast<int>(i + 1), freq);
    c = conv_mfm(id + "-2", 3, c, s(blocks[i].spatial_out));
    pool(static_cast<int>(i + 2));
    freq /= 2;
  }
  append_2d_head(spec, c, freq);
  return spec;
}

NetworkSpec build_xvector(const TopologyOptions& options) {
  NetworkSpec spec;
  spec.kind = TopologyKind::xvector;
  spec.name = "xvector";
  spec.options = options;
  const std::array<std::vector<int>, 6> contexts{
      std::vector<int>{-2, -1, 0, 1, 2}, {-2, 0, 2}, {-3, 0, 3}, {-4, 0, 4}, {0}, {0}};
  std::size_t in = options.n_mels;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const std::string id = std::to_string(i + 1);
    const std::size_t out = scaled(i + 1 == contexts.size() ? 768 : 256, options);
    LayerSpec conv = simple_layer("Conv1D-" + id, LayerKind::conv1d);
    conv.offsets = contexts[i];
    conv.in_channels = in;
    conv.out_channels = out;
    spec.layers.push_back(conv);
    spec.layers.push_back(activation_layer("ReLU-" + id, ActivationKind::relu));
    spec.layers.push_back(batchnorm_layer("BatchNorm-" + id, NormAxis::feature, out));
    LayerSpec drop = simple_layer("Dropout-" + id, LayerKind::dropout);
    drop.dropout_rate = options.dropout_rate;
    spec.layers.push_back(drop);
    in = out;
  }
  spec.layers.push_back(attention_layer(in, true));
  const std::size_t hidden = scaled(256, options);
  spec.layers.push_back(dense_layer("Dense1", 2 * in, hidden));
  spec.layers.push_back(activation_layer("LeakyReLU-7", ActivationKind::leaky_relu));
  spec.layers.push_back(batchnorm_layer("BatchNorm-7", NormAxis::feature, hidden));
  LayerSpec drop7 = simple_layer("Dropout-7", LayerKind::dropout);
  drop7.dropout_rate = options.dropout_rate;
  spec.layers.push_back(drop7);
  spec.layers.push_back(dense_layer("Dense2", hidden, hidden));
  spec.layers.push_back(activation_layer("LeakyReLU-8", ActivationKind::leaky_relu));
  spec.layers.push_back(batchnorm_layer("BatchNorm-8", NormAxis::feature, hidden));
  spec.layers.push_back(dense_layer("Dense3 (softmax)", hidden, options.n_classes));
  spec.layers.push_back(simple_layer("Softmax", LayerKind::softmax, false));
  return spec;
}

NetworkSpec build_topology(TopologyKind kind, const TopologyOptions& options) {
  switch (kind) {
    case TopologyKind::vgg: return build_vgg(options);
    case TopologyKind::lcnn: return build_lcnn(options);
    case TopologyKind::xvector: return build_xvector(options);
  }
  throw ConfigError("unknown topology");
}

std::size_t param_count(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::conv2d:
      return l.kernel_h * l.kernel_w * l.in_channels * l.out_channels + l.out_channels;
    case LayerKind::conv1d:
      return l.offsets.size() * l.in_channels * l.out_channels + l.out_channels;
    case LayerKind::dense:
      return l.in_channels * l.out_channels + l.out_channels;
    case LayerKind::batchnorm:
      return 4 * l.norm_length;
    case LayerKind::attention_pool:
      return attention_param_count(l.in_channels);
    default:
      return 0;
  }
}

ParamCountReport param_count(const NetworkSpec& spec) {
  ParamCountReport r;
  for (const auto& l : spec.layers) {
    r.per_layer.push_back(param_count(l));
    r.total += r.per_layer.back();
  }
  return r;
}

Shape layer_output_shape(const LayerSpec& l, const Shape& in) {
  auto fail = [&](const std::string& why) -> Shape {
    throw DimensionError(l.name + ": " + why + " (input " + shape_str(in) + ")");
  };
  switch (l.kind) {
    case LayerKind::conv2d:
      if (in.size() != 3 || in[2] != l.in_channels) return fail("channel mismatch");
      return {in[0], in[1], l.out_channels};
    case LayerKind::conv1d:
      if (in.size() != 2 || in[1] != l.in_channels) return fail("channel mismatch");
      return {in[0], l.out_channels};
    case LayerKind::maxpool:
      if (in.size() != 3 || in[0] % 2 != 0) return fail("needs an even frequency axis");
      return {in[0] / 2, in[1], in[2]};
    case LayerKind::mfm:
      if (in.back() % 2 != 0) return fail("needs an even channel count");
      {
        Shape out = in;
        out.back() /= 2;
        return out;
      }
    case LayerKind::batchnorm: {
      const std::size_t len = l.norm_axis == NormAxis::frequency ? in.front() : in.back();
      if (len != l.norm_length) return fail("normalized axis length mismatch");
      return in;
    }
    case LayerKind::dense:
      if (in.size() != 1 || in[0] != l.in_channels) return fail("input width mismatch");
      return {l.out_channels};
    case LayerKind::attention_pool:
      if (in.back() != l.in_channels) return fail("attention width mismatch");
      if (in.size() == 3) return {in[0], l.use_std ? 2 * in[2] : in[2]};
      if (in.size() == 2) return {l.use_std ? 2 * in[1] : in[1]};
      return fail("expects a sequence or feature map");
    case LayerKind::flatten:
      return {shape_size(in)};
    case LayerKind::dropout:
    case LayerKind::activation:
    case LayerKind::softmax:
      return in;
  }
  return in;
}

std::vector<Shape> propagate_shapes(const NetworkSpec& spec, std::size_t n_frames) {
  std::vector<Shape> shapes;
  Shape cur = spec.input_shape(n_frames);
  for (const auto& l : spec.layers) {
    cur = layer_output_shape(l, cur);
    shapes.push_back(cur);
  }
  return shapes;
}

std::string canonical_text(const NetworkSpec& spec) {
  std::ostringstream os;
  os << "topology=" << to_string(spec.kind) << ";n_mels=" << spec.options.n_mels
     << ";classes=" << spec.options.n_classes << ";divisor=" << spec.options.width_divisor
     << ";dropout=" << spec.options.dropout_rate << '\n';
  for (const auto& l : spec.layers) {
    os << l.name << '|' << to_string(l.kind) << '|' << l.kernel_h << 'x' << l.kernel_w << '|';
    for (int o : l.offsets) os << o << ',';
    os << '|' << l.in_channels << '>' << l.out_channels << '|'
       << (l.norm_axis == NormAxis::frequency ? 'F' : 'C') << l.norm_length << '|'
       << static_cast<int>(l.activation) << '|' << l.dropout_rate << '|' << l.use_std << '\n';
  }
  return os.str();
}

std::uint64_t spec_hash(const NetworkSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical_text(spec)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<DeviationEntry> read_deviation_ledger(std::istream& in) {
  std::vector<DeviationEntry> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line_no == 1) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      f.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 6) {
      throw FormatError("deviation ledger line " + std::to_string(line_no) + ": expected 6 fields, got " +
                        std::to_string(f.size()));
    }
    if (f[2] != "params" && f[2] != "output") {
      throw FormatError("deviation ledger line " + std::to_string(line_no) + ": unknown column '" +
                        f[2] + "'");
    }
    rows.push_back({f[0], f[1], f[2], f[3], f[4], f[5]});
  }
  return rows;
}

std::vector<DeviationEntry> read_deviation_ledger(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open deviation ledger " + path.string());
  return read_deviation_ledger(in);
}

}  // namespace ascnet
