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

#include "ascnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ascnet/errors.hpp"
#include "ascnet/ops.hpp"

namespace ascnet {
namespace {

using nlohmann::json;

// Stream tags for the counter-based generators used by train().
constexpr std::uint64_t kShuffleStream = 0x5B0FF1Eull;
constexpr std::uint64_t kCropStream = 0xC409ull;
constexpr std::uint64_t kDropoutStream = 0xD809ull;
constexpr std::uint64_t kInitStream = 0x1A17ull;

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

json to_json(const TopologyOptions& o) {
  return {{"width_divisor", o.width_divisor},
          {"n_mels", o.n_mels},
          {"dropout_rate", o.dropout_rate},
          {"n_classes", o.n_classes}};
}

TopologyOptions options_from_json(const json& j) {
  TopologyOptions o;
  o.width_divisor = j.at("width_divisor").get<std::size_t>();
  o.n_mels = j.at("n_mels").get<std::size_t>();
  o.dropout_rate = j.at("dropout_rate").get<double>();
  o.n_classes = j.at("n_classes").get<std::size_t>();
  return o;
}

json to_json(const TrainConfig& c) {
  return {{"lr0", c.lr0},
          {"lr_final", c.lr_final},
          {"decay_start_epoch", c.decay_start_epoch},
          {"decay_end_epoch", c.decay_end_epoch},
          {"max_epochs", c.max_epochs},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"crop_len", c.crop_len},
          {"seed", c.seed},
          {"dropout_rate", c.dropout_rate}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.lr0 = j.at("lr0").get<double>();
  c.lr_final = j.at("lr_final").get<double>();
  c.decay_start_epoch = j.at("decay_start_epoch").get<int>();
  c.decay_end_epoch = j.at("decay_end_epoch").get<int>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.patience = j.at("patience").get<int>();
  c.crop_len = j.at("crop_len").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  return c;
}

// Mean cross-entropy and correct count for a block of logits, in double.
void score_logits(std::span<const float> logits, std::size_t n_classes, std::span<const int> targets,
                  double& loss_sum, std::size_t& correct) {
  for (std::size_t b = 0; b < targets.size(); ++b) {
    const float* row = logits.data() + b * n_classes;
    double mx = row[0];
    std::size_t arg = 0;
    for (std::size_t k = 1; k < n_classes; ++k)
      if (row[k] > mx) {
        mx = row[k];
        arg = k;
      }
    double z = 0.0;
    for (std::size_t k = 0; k < n_classes; ++k) z += std::exp(static_cast<double>(row[k]) - mx);
    loss_sum += std::log(z) + mx - static_cast<double>(row[targets[b]]);
    correct += arg == static_cast<std::size_t>(targets[b]);
  }
}

std::vector<LogMelFeatures> standardized_copies(std::span<const LabeledSegment> set, const BandStats& stats) {
  std::vector<LogMelFeatures> out;
  out.reserve(set.size());
  for (const auto& s : set) {
    out.push_back(s.features);
    standardize(out.back(), stats);
  }
  return out;
}

// Writes standardized-or-raw feature blocks into a network input tensor.
Tensor<float> pack(const NetworkSpec& spec, std::span<const LogMelFeatures* const> features) {
  if (features.empty()) throw InputError("empty batch");
  const std::size_t n_mels = features.front()->n_mels, n_frames = features.front()->n_frames;
  if (n_mels != spec.options.n_mels) {
    throw DimensionError("features have " + std::to_string(n_mels) + " mel bands but " +
                         std::string(to_string(spec.kind)) + " expects " + std::to_string(spec.options.n_mels));
  }
  const std::size_t per = n_mels * n_frames;
  Shape shape = spec.is_2d() ? Shape{features.size(), n_mels, n_frames, 1} : Shape{features.size(), n_frames, n_mels};
  Tensor<float> x(shape);
  auto d = x.data();
  for (std::size_t b = 0; b < features.size(); ++b) {
    const auto& f = *features[b];
    if (f.n_mels != n_mels || f.n_frames != n_frames) throw DimensionError("batch mixes feature shapes");
    float* dst = d.data() + b * per;
    if (spec.is_2d()) {
      std::copy(f.values.begin(), f.values.end(), dst);
    } else {
      for (std::size_t m = 0; m < n_mels; ++m)
        for (std::size_t t = 0; t < n_frames; ++t) dst[t * n_mels + m] = f.values[m * n_frames + t];
    }
  }
  return x;
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalResult evaluate_set(Network<float>& net, const std::vector<LogMelFeatures>& feats,
                        std::span<const LabeledSegment> set, std::size_t batch) {
  CounterRng unused(0);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < feats.size(); start += batch) {
    const std::size_t end = std::min(feats.size(), start + batch);
    std::vector<const LogMelFeatures*> ptrs;
    std::vector<int> targets;
    for (std::size_t i = start; i < end; ++i) {
      ptrs.push_back(&feats[i]);
      targets.push_back(static_cast<int>(set[i].label));
    }
    Tape<float> tape(false);
    const auto logits = net.forward(tape, pack(net.spec(), ptrs), Mode::infer, unused);
    score_logits(logits.data(), net.spec().options.n_classes, targets, loss_sum, correct);
  }
  const double n = static_cast<double>(feats.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr0 > 0.0) || !(lr_final > 0.0) || lr_final > lr0)
    throw ConfigError("train config: need 0 < lr_final <= lr0");
  if (decay_start_epoch < 1 || decay_end_epoch <= decay_start_epoch)
    throw ConfigError("train config: need 1 <= decay_start_epoch < decay_end_epoch");
  if (max_epochs < 1 || max_epochs > decay_end_epoch)
    throw ConfigError("train config: max_epochs must be in [1, decay_end_epoch]");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be positive");
  if (patience < 1) throw ConfigError("train config: patience must be positive");
  if (crop_len < 1 || crop_len > kSegmentFrames)
    throw ConfigError("train config: crop_len must be in [1, " + std::to_string(kSegmentFrames) + "]");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("train config: dropout_rate must be in [0, 1)");
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 1 || epoch > cfg.decay_end_epoch) {
    throw ContractError("lr_schedule: epoch " + std::to_string(epoch) + " outside [1, " +
                        std::to_string(cfg.decay_end_epoch) + "]");
  }
  if (epoch <= cfg.decay_start_epoch) return cfg.lr0;
  if (epoch == cfg.decay_end_epoch) return cfg.lr_final;
  const double frac = static_cast<double>(epoch - cfg.decay_start_epoch) /
                      static_cast<double>(cfg.decay_end_epoch - cfg.decay_start_epoch);
  return cfg.lr0 + frac * (cfg.lr_final - cfg.lr0);
}

std::size_t crop_start(std::size_t n_frames, std::size_t crop_len, CounterRng& rng) {
  if (n_frames < crop_len) {
    throw InputError("crop: segment has " + std::to_string(n_frames) + " frames, fewer than " +
                     std::to_string(crop_len));
  }
  return static_cast<std::size_t>(rng.below(n_frames - crop_len + 1));
}

LogMelFeatures crop(const LogMelFeatures& f, std::size_t start, std::size_t crop_len) {
  if (start + crop_len > f.n_frames) throw IndexError("crop: window exceeds segment");
  LogMelFeatures out{f.n_mels, crop_len, std::vector<float>(f.n_mels * crop_len)};
  for (std::size_t m = 0; m < f.n_mels; ++m) {
    const auto src = f.values.begin() + static_cast<std::ptrdiff_t>(m * f.n_frames + start);
    std::copy(src, src + static_cast<std::ptrdiff_t>(crop_len),
              out.values.begin() + static_cast<std::ptrdiff_t>(m * crop_len));
  }
  return out;
}

LogMelFeatures sample_crop(const LogMelFeatures& f, CounterRng& rng, std::size_t crop_len) {
  return crop(f, crop_start(f.n_frames, crop_len, rng), crop_len);
}

template <typename T>
void Adam<T>::step(std::vector<NamedTensor<T>>& params, double lr) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ContractError("adam: parameter list changed between steps");
  for (const auto& p : params) {
    if (!p.value.has_grad()) continue;
    for (T g : p.value.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("adam: non-finite gradient in layer '" + p.layer + "' (tensor " + p.name + ")");
      }
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.value.has_grad()) continue;
    auto w = p.value.data();
    const auto g = p.value.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      const double mhat = m[j] / c1, vhat = v[j] / c2;
      w[j] = static_cast<T>(w[j] - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

bool EarlyStopper::update(int epoch, double val_loss) {
  if (best_epoch_ == 0 || val_loss < best_loss_) {
    best_epoch_ = epoch;
    best_loss_ = val_loss;
    return true;
  }
  return false;
}

Checkpoint make_checkpoint(const Network<float>& net, const BandStats& norm) {
  Checkpoint c;
  c.topology = net.spec().kind;
  c.options = net.spec().options;
  c.spec_hash = spec_hash(net.spec());
  for (const auto* t : net.state())
    c.tensors.push_back({t->name, t->value.shape(), {t->value.data().begin(), t->value.data().end()}});
  c.normalization = norm;
  return c;
}

Network<float> restore_network(const Checkpoint& ckpt) {
  const NetworkSpec spec = ckpt.spec();
  if (spec_hash(spec) != ckpt.spec_hash) {
    throw IntegrityError("checkpoint spec hash " + hex64(ckpt.spec_hash) + " does not match the " +
                         std::string(to_string(spec.kind)) + " topology it names (" + hex64(spec_hash(spec)) + ")");
  }
  Network<float> net(spec, 0);
  const auto state = net.state();
  if (state.size() != ckpt.tensors.size()) {
    throw IntegrityError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, network needs " +
                         std::to_string(state.size()));
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto& t = ckpt.tensors[i];
    if (t.name != state[i]->name || t.shape != state[i]->value.shape())
      throw IntegrityError("checkpoint tensor '" + t.name + "' does not match '" + state[i]->name + "'");
    net.set_state(t.name, t.values);
  }
  return net;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  json header;
  header["topology"] = std::string(to_string(c.topology));
  header["options"] = to_json(c.options);
  header["spec_hash"] = hex64(c.spec_hash);
  header["normalization"] = {{"mean", c.normalization.mean}, {"std", c.normalization.stddev}};
  header["training"] = {{"epoch", c.epoch}, {"epochs_run", c.epochs_run}, {"best_val_loss", c.best_val_loss},
                        {"rng", {{"generator", "splitmix64-counter"}, {"seed", c.config.seed}}}};
  header["config"] = to_json(c.config);
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& t : c.tensors) {
    if (t.values.size() != shape_size(t.shape))
      throw DimensionError("checkpoint tensor '" + t.name + "' size does not match its shape");
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += 4 * t.values.size();
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out{'A', 'S', 'C', 'M', 1};
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put_u32(static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& t : c.tensors)
    for (float v : t.values) {
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      put_u32(u);
    }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> b) {
  if (b.size() < 9 || std::memcmp(b.data(), "ASCM", 4) != 0) throw FormatError("checkpoint: missing ASCM magic");
  if (b[4] != 1) throw FormatError("checkpoint: unsupported version " + std::to_string(b[4]));
  auto u32 = [&](std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
  };
  const std::size_t header_len = u32(5);
  if (b.size() < 9 + header_len) throw FormatError("checkpoint: truncated header");
  Checkpoint c;
  try {
    const json h = json::parse(b.begin() + 9, b.begin() + 9 + static_cast<std::ptrdiff_t>(header_len));
    c.topology = parse_topology(h.at("topology").get<std::string>());
    c.options = options_from_json(h.at("options"));
    c.spec_hash = std::stoull(h.at("spec_hash").get<std::string>(), nullptr, 16);
    c.normalization.mean = h.at("normalization").at("mean").get<std::vector<double>>();
    c.normalization.stddev = h.at("normalization").at("std").get<std::vector<double>>();
    const auto& tr = h.at("training");
    c.epoch = tr.at("epoch").get<int>();
    c.epochs_run = tr.at("epochs_run").get<int>();
    c.best_val_loss = tr.at("best_val_loss").get<double>();
    c.config = config_from_json(h.at("config"));
    const std::size_t payload = 9 + header_len;
    for (const auto& t : h.at("tensors")) {
      StoredTensor st;
      st.name = t.at("name").get<std::string>();
      st.shape = t.at("shape").get<Shape>();
      const std::size_t offset = t.at("offset").get<std::size_t>();
      const std::size_t count = shape_size(st.shape);
      if (payload + offset + 4 * count > b.size())
        throw FormatError("checkpoint: payload of tensor '" + st.name + "' is truncated");
      st.values.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t u = u32(payload + offset + 4 * i);
        std::memcpy(&st.values[i], &u, 4);
      }
      c.tensors.push_back(std::move(st));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string format_epoch(const EpochRecord& r) {
  std::ostringstream os;
  os.precision(9);
  os << r.epoch << '\t' << r.lr << '\t' << r.train_loss << '\t' << r.val_loss << '\t' << r.val_accuracy;
  return os.str();
}

Tensor<float> make_batch(const NetworkSpec& spec, std::span<const LogMelFeatures* const> features) {
  return pack(spec, features);
}

Network<float> initial_network(const NetworkSpec& spec, const TrainConfig& cfg) {
  return Network<float>(spec, CounterRng::mix(cfg.seed ^ kInitStream));
}

TrainResult train(const NetworkSpec& spec, std::span<const LabeledSegment> train_set,
                  std::span<const LabeledSegment> val_set, const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (train_set.empty()) throw InputError("train: empty training set");
  if (val_set.empty()) throw InputError("train: empty validation set");
  for (const auto& v : val_set)
    for (const auto& t : train_set)
      if (!v.id.empty() && v.id == t.id) throw InputError("train: segment '" + v.id + "' is in both train and validation sets");
  for (const auto* set : {&train_set, &val_set})
    for (const auto& s : *set)
      if (s.label >= spec.options.n_classes)
        throw IndexError("train: segment '" + s.id + "' has label " + std::to_string(s.label));

  std::vector<const LogMelFeatures*> raw;
  for (const auto& s : train_set) raw.push_back(&s.features);
  const BandStats norm = compute_band_stats(raw);
  const auto train_feats = standardized_copies(train_set, norm);
  const auto val_feats = standardized_copies(val_set, norm);

  Network<float> net = initial_network(spec, cfg);
  Adam<float> adam;
  EarlyStopper stopper(cfg.patience);
  TrainResult result;
  const std::size_t n = train_set.size();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    // Batch boundaries; a trailing batch of one joins its predecessor so that
    // batch statistics stay defined.
    std::vector<std::size_t> bounds;
    for (std::size_t s = 0; s < n; s += cfg.batch_size) bounds.push_back(s);
    bounds.push_back(n);
    if (bounds.size() > 2 && bounds[bounds.size() - 1] - bounds[bounds.size() - 2] == 1)
      bounds.erase(bounds.end() - 2);

    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi + 1 < bounds.size(); ++bi) {
      std::vector<LogMelFeatures> crops;
      std::vector<int> targets;
      for (std::size_t i = bounds[bi]; i < bounds[bi + 1]; ++i) {
        const std::size_t idx = order[i];
        CounterRng crop_rng(cfg.seed, {kCropStream, static_cast<std::uint64_t>(epoch), idx});
        crops.push_back(sample_crop(train_feats[idx], crop_rng, cfg.crop_len));
        targets.push_back(static_cast<int>(train_set[idx].label));
      }
      std::vector<const LogMelFeatures*> ptrs;
      for (const auto& c : crops) ptrs.push_back(&c);
      for (auto& p : net.parameters()) p.value.zero_grad();
      Tape<float> tape;
      CounterRng dropout(cfg.seed, {kDropoutStream, static_cast<std::uint64_t>(epoch), bi});
      const auto logits = net.forward(tape, pack(spec, ptrs), Mode::train, dropout);
      auto loss = softmax_cross_entropy(tape, logits, std::span<const int>(targets));
      const double l = loss.item();
      if (!std::isfinite(l)) throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      tape.backward(loss);
      adam.step(net.parameters(), lr);
      loss_sum += l * static_cast<double>(targets.size());
    }

    const EvalResult val = evaluate_set(net, val_feats, val_set, 8);
    const EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(n), val.loss, val.accuracy};
    result.history.push_back(rec);
    if (log) *log << format_epoch(rec) << '\n' << std::flush;
    if (stopper.update(epoch, val.loss)) {
      result.best = make_checkpoint(net, norm);
      result.best.epoch = epoch;
      result.best.best_val_loss = val.loss;
    }
    result.best.epochs_run = epoch;
    if (stopper.should_stop(epoch)) break;
  }
  result.best.config = cfg;
  return result;
}

Predictor::Predictor(const Checkpoint& ckpt, const std::optional<NetworkSpec>& expected)
    : net_(restore_network(ckpt)), norm_(ckpt.normalization) {
  if (expected && spec_hash(*expected) != ckpt.spec_hash) {
    throw IntegrityError("checkpoint was trained for a different network: stored spec hash " + hex64(ckpt.spec_hash) +
                         ", requested " + std::string(to_string(expected->kind)) + " with hash " +
                         hex64(spec_hash(*expected)));
  }
}

std::vector<double> Predictor::predict(const LogMelFeatures& features) {
  const LogMelFeatures* p = &features;
  return predict(std::span<const LogMelFeatures* const>(&p, 1)).front();
}

std::vector<std::vector<double>> Predictor::predict(std::span<const LogMelFeatures* const> features,
                                                    std::size_t batch) {
  std::vector<std::vector<double>> out;
  CounterRng unused(0);
  const std::size_t k = net_.spec().options.n_classes;
  for (std::size_t start = 0; start < features.size(); start += batch) {
    const std::size_t end = std::min(features.size(), start + batch);
    std::vector<LogMelFeatures> scaled;
    for (std::size_t i = start; i < end; ++i) {
      scaled.push_back(*features[i]);
      standardize(scaled.back(), norm_);
    }
    std::vector<const LogMelFeatures*> ptrs;
    for (const auto& s : scaled) ptrs.push_back(&s);
    Tape<float> tape(false);
    const auto logits = net_.forward(tape, pack(net_.spec(), ptrs), Mode::infer, unused);
    const auto d = logits.data();
    for (std::size_t b = 0; b < ptrs.size(); ++b) out.emplace_back(d.begin() + b * k, d.begin() + (b + 1) * k);
  }
  return out;
}

std::vector<double> predict_segment(const Checkpoint& ckpt, const LogMelFeatures& features,
                                    const std::optional<NetworkSpec>& expected) {
  return Predictor(ckpt, expected).predict(features);
}

}  // namespace ascnet
