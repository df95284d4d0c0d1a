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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ascnet/dsp.hpp"
#include "ascnet/network.hpp"
#include "ascnet/rng.hpp"
#include "ascnet/topology.hpp"

namespace ascnet {

struct TrainConfig {
  double lr0 = 1e-3;
  double lr_final = 1e-6;
  int decay_start_epoch = 50;
  int decay_end_epoch = 500;
  int max_epochs = 500;
  std::size_t batch_size = 128;
  int patience = 100;
  std::size_t crop_len = 128;
  std::uint64_t seed = 0;
  // Applied when the topology is built from this config.
  double dropout_rate = 0.2;

  // Throws ConfigError when the fields are inconsistent.
  void validate() const;
};

// Constant lr0 up to decay_start_epoch, then linear down to lr_final at
// decay_end_epoch. Epochs are 1-based; outside [1, decay_end_epoch] throws
// ContractError.
double lr_schedule(int epoch, const TrainConfig& cfg = {});

// Start frame of a random crop, uniform on [0, n_frames - crop_len].
std::size_t crop_start(std::size_t n_frames, std::size_t crop_len, CounterRng& rng);
// Contiguous frames [start, start + crop_len) of every band.
LogMelFeatures crop(const LogMelFeatures& f, std::size_t start, std::size_t crop_len);
LogMelFeatures sample_crop(const LogMelFeatures& f, CounterRng& rng, std::size_t crop_len = 128);

// Adam with bias correction.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Updates every parameter from its gradient. A non-finite gradient throws
  // NumericError naming the tensor and its layer before anything changes.
  void step(std::vector<NamedTensor<T>>& params, double lr);
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Stops once `patience` epochs have passed without a strict improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  // Records the validation loss of `epoch`; returns true when it is a new best.
  bool update(int epoch, double val_loss);
  bool should_stop(int epoch) const { return best_epoch_ > 0 && epoch - best_epoch_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_loss_ = 0.0;
};

struct LabeledSegment {
  std::string id;
  std::size_t label = 0;
  LogMelFeatures features;
};

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  TopologyKind topology = TopologyKind::vgg;
  TopologyOptions options;
  std::uint64_t spec_hash = 0;
  std::vector<StoredTensor> tensors;  // parameters then buffers
  BandStats normalization;
  int epoch = 0;  // epoch the weights come from
  int epochs_run = 0;
  double best_val_loss = 0.0;
  TrainConfig config;

  NetworkSpec spec() const { return build_topology(topology, options); }
};

Checkpoint make_checkpoint(const Network<float>& net, const BandStats& norm);
// Rebuilds the network; throws IntegrityError when the stored hash does not
// match the rebuilt spec or a tensor is missing or misshapen.
Network<float> restore_network(const Checkpoint& ckpt);

// "ASCM", version byte 1, u32 JSON header length, JSON header, then
// little-endian float32 payloads in header order.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};
std::string format_epoch(const EpochRecord& r);

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
};

// The freshly initialized network train() starts from.
Network<float> initial_network(const NetworkSpec& spec, const TrainConfig& cfg);

// Minibatch Adam on random crops with full-segment validation every epoch.
// Band statistics come from the training set. The returned checkpoint holds
// the weights of the epoch with the lowest validation loss. When `log` is
// given, one tab-separated line per epoch is written to it.
TrainResult train(const NetworkSpec& spec, std::span<const LabeledSegment> train_set,
                  std::span<const LabeledSegment> val_set, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

// Standardized network input for whole segments or crops.
Tensor<float> make_batch(const NetworkSpec& spec, std::span<const LogMelFeatures* const> features);

// Full-length inference with a restored checkpoint.
class Predictor {
 public:
  // With `expected` set, a spec-hash mismatch throws IntegrityError.
  explicit Predictor(const Checkpoint& ckpt, const std::optional<NetworkSpec>& expected = std::nullopt);

  // Pre-softmax scores for one segment of raw (unstandardized) features.
  std::vector<double> predict(const LogMelFeatures& features);
  // One score row per segment, batched.
  std::vector<std::vector<double>> predict(std::span<const LogMelFeatures* const> features,
                                           std::size_t batch = 8);

 private:
  Network<float> net_;
  BandStats norm_;
};

std::vector<double> predict_segment(const Checkpoint& ckpt, const LogMelFeatures& features,
                                    const std::optional<NetworkSpec>& expected = std::nullopt);

}  // namespace ascnet
