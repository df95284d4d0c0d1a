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
#include <span>
#include <vector>

#include "ascnet/wav.hpp"

namespace ascnet {

constexpr int kTargetRate = 22050;
constexpr std::size_t kFftSize = 2048;
constexpr std::size_t kHopLength = 430;
constexpr std::size_t kNumBins = kFftSize / 2 + 1;
constexpr std::size_t kNumMels = 256;
constexpr std::size_t kSegmentFrames = 512;
constexpr double kLogFloor = 1e-10;

// Mono audio at a single rate.
struct AudioSegment {
  int sample_rate = 0;
  std::vector<double> samples;
};

// Kaiser-windowed sinc resampler by the rational factor up / down.
// Half-width is `zero_crossings` zero crossings of the (possibly narrowed)
// low-pass kernel; the cutoff is rolloff * min(1, up / down) of the input
// Nyquist.
struct ResamplerConfig {
  double kaiser_beta = 8.6;
  int zero_crossings = 64;
  double rolloff = 0.95;
};

std::vector<double> resample(std::span<const double> x, int src_rate, int dst_rate,
                             const ResamplerConfig& cfg = {});

// Mono mixdown, mean removal, resampling to 22050 Hz and a final mean
// removal so the output is zero-mean. Supported source rates: 48000,
// 44100, 22050.
AudioSegment preprocess(const RawAudio& raw);

// Power spectrogram [kNumBins x T] (row-major, bin-major) of a
// reflect-padded, centred STFT with a periodic Hamming window of 2048 and
// hop 430. T = floor(n / 430) + 1.
struct Spectrogram {
  std::size_t n_bins = 0;
  std::size_t n_frames = 0;
  std::vector<double> power;
  double at(std::size_t bin, std::size_t frame) const { return power[bin * n_frames + frame]; }
};
Spectrogram stft_power(const AudioSegment& seg);

std::vector<double> hamming_window(std::size_t n);

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// [n_mels x n_bins] area-normalized triangular filters spanning 0..sr/2.
// Throws ConfigError when a filter covers no FFT bin.
struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  std::vector<double> weights;
  std::vector<double> center_hz;
  double at(std::size_t m, std::size_t k) const { return weights[m * n_bins + k]; }
};
MelFilterbank mel_filterbank(std::size_t n_mels = kNumMels, std::size_t n_bins = kNumBins,
                             int sample_rate = kTargetRate);

// Log-mel features [n_mels x n_frames], band-major.
struct LogMelFeatures {
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  std::vector<float> values;
  float at(std::size_t m, std::size_t t) const { return values[m * n_frames + t]; }
};

// ln(max(mel . power, 1e-10)), truncated or floor-padded to n_frames.
LogMelFeatures log_mel(const AudioSegment& seg, std::size_t n_frames = kSegmentFrames);
LogMelFeatures log_mel(const Spectrogram& spec, const MelFilterbank& fb, std::size_t n_frames);
// Same values in double precision, band-major.
std::vector<double> log_mel_values(const Spectrogram& spec, const MelFilterbank& fb,
                                   std::size_t n_frames);

// Convenience: preprocess + log_mel.
LogMelFeatures extract_features(const RawAudio& raw);

// Feature cache: "ASCF", version byte 1, u32 n_mels, u32 n_frames, then
// little-endian float32 values, band-major.
std::vector<std::uint8_t> encode_features(const LogMelFeatures& f);
LogMelFeatures decode_features(std::span<const std::uint8_t> bytes);
void write_features(const std::filesystem::path& path, const LogMelFeatures& f);
LogMelFeatures read_features(const std::filesystem::path& path);

// Per-band standardization statistics estimated on training features.
struct BandStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};
BandStats compute_band_stats(std::span<const LogMelFeatures* const> features);
// (x - mean) / stddev per band, in place.
void standardize(LogMelFeatures& f, const BandStats& stats);

}  // namespace ascnet
