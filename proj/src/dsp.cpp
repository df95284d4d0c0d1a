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

#include "ascnet/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

#include "ascnet/errors.hpp"

namespace ascnet {
namespace {

constexpr double kMinLogHz = 1000.0;
constexpr double kLinearSlope = 200.0 / 3.0;  // Hz per mel below 1 kHz
constexpr double kMinLogMel = kMinLogHz / kLinearSlope;
const double kLogStep = std::log(6.4) / 27.0;

double bessel_i0(double x) {
  // Power series; converges quickly for the arguments used here (x <= 8.6).
  double sum = 1.0, term = 1.0;
  const double q = 0.25 * x * x;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

void subtract_mean(std::vector<double>& x) {
  if (x.empty()) return;
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  for (double& v : x) v -= m;
}

// FFTW planning is not thread-safe; execution of a finished plan is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  double power(std::size_t k) const { return out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]; }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

// Mirror index into [0, n) without repeating the edge sample.
std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long j = i % period;
  if (j < 0) j += period;
  if (j >= static_cast<long>(n)) j = period - j;
  return static_cast<std::size_t>(j);
}

}  // namespace

std::vector<double> resample(std::span<const double> x, int src_rate, int dst_rate,
                             const ResamplerConfig& cfg) {
  if (src_rate <= 0 || dst_rate <= 0) throw ConfigError("resample: rates must be positive");
  if (src_rate == dst_rate) return {x.begin(), x.end()};
  const long g = std::gcd(src_rate, dst_rate);
  const long up = dst_rate / g, down = src_rate / g;
  const double scale = cfg.rolloff * std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const double half_width = cfg.zero_crossings / scale;  // in input samples
  const long taps_each_side = static_cast<long>(std::ceil(half_width));
  const std::size_t n_taps = static_cast<std::size_t>(2 * taps_each_side);
  const double i0_beta = bessel_i0(cfg.kaiser_beta);

  // Phase p covers output instants whose fractional input position is p / up.
  // Tap j multiplies input sample k0 - taps_each_side + 1 + j.
  std::vector<double> table(static_cast<std::size_t>(up) * n_taps);
  for (long p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    for (std::size_t j = 0; j < n_taps; ++j) {
      const double d = frac + static_cast<double>(taps_each_side - 1) - static_cast<double>(j);
      const double u = d / half_width;
      double w = 0.0;
      if (std::abs(u) <= 1.0) w = bessel_i0(cfg.kaiser_beta * std::sqrt(1.0 - u * u)) / i0_beta;
      table[static_cast<std::size_t>(p) * n_taps + j] = scale * sinc(scale * d) * w;
    }
  }

  const std::size_t n_in = x.size();
  const std::size_t n_out = static_cast<std::size_t>(
      (static_cast<unsigned long long>(n_in) * static_cast<unsigned long long>(up) +
       static_cast<unsigned long long>(down) - 1) /
      static_cast<unsigned long long>(down));
  std::vector<double> y(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const unsigned long long pos = static_cast<unsigned long long>(n) * static_cast<unsigned long long>(down);
    const long k0 = static_cast<long>(pos / static_cast<unsigned long long>(up));
    const std::size_t phase = static_cast<std::size_t>(pos % static_cast<unsigned long long>(up));
    const double* h = table.data() + phase * n_taps;
    const long first = k0 - taps_each_side + 1;
    const long lo = std::max<long>(0, -first);
    const long hi = std::min<long>(static_cast<long>(n_taps), static_cast<long>(n_in) - first);
    double acc = 0.0;
    for (long j = lo; j < hi; ++j) acc += x[static_cast<std::size_t>(first + j)] * h[j];
    y[n] = acc;
  }
  return y;
}

AudioSegment preprocess(const RawAudio& raw) {
  if (raw.channels < 1) throw InputError("preprocess: audio has no channels");
  if (raw.samples.empty()) throw InputError("preprocess: empty signal");
  if (raw.sample_rate != 48000 && raw.sample_rate != 44100 && raw.sample_rate != kTargetRate) {
    throw ConfigError("preprocess: unsupported sample rate " + std::to_string(raw.sample_rate) +
                      " (expected 48000, 44100 or 22050)");
  }
  const std::size_t ch = static_cast<std::size_t>(raw.channels);
  const std::size_t frames = raw.samples.size() / ch;
  std::vector<double> mono(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < ch; ++c) s += raw.samples[i * ch + c];
    mono[i] = s / static_cast<double>(ch);
  }
  subtract_mean(mono);
  AudioSegment seg;
  seg.sample_rate = kTargetRate;
  seg.samples = resample(mono, raw.sample_rate, kTargetRate);
  subtract_mean(seg.samples);
  return seg;
}

std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

Spectrogram stft_power(const AudioSegment& seg) {
  if (seg.sample_rate != kTargetRate) {
    throw ConfigError("stft_power: expected " + std::to_string(kTargetRate) + " Hz, got " +
                      std::to_string(seg.sample_rate));
  }
  const std::size_t n = seg.samples.size();
  if (n < kHopLength) {
    throw InputError("stft_power: signal of " + std::to_string(n) +
                     " samples is shorter than one hop");
  }
  Spectrogram s;
  s.n_bins = kNumBins;
  s.n_frames = n / kHopLength + 1;
  s.power.assign(s.n_bins * s.n_frames, 0.0);
  const auto window = hamming_window(kFftSize);
  RealFft fft(kFftSize);
  const long half = static_cast<long>(kFftSize / 2);
  for (std::size_t t = 0; t < s.n_frames; ++t) {
    const long start = static_cast<long>(t * kHopLength) - half;
    double* in = fft.input();
    for (std::size_t i = 0; i < kFftSize; ++i)
      in[i] = seg.samples[reflect_index(start + static_cast<long>(i), n)] * window[i];
    fft.execute();
    for (std::size_t k = 0; k < s.n_bins; ++k) s.power[k * s.n_frames + t] = fft.power(k);
  }
  return s;
}

double hz_to_mel(double hz) {
  if (hz < kMinLogHz) return hz / kLinearSlope;
  return kMinLogMel + std::log(hz / kMinLogHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kMinLogMel) return mel * kLinearSlope;
  return kMinLogHz * std::exp(kLogStep * (mel - kMinLogMel));
}

MelFilterbank mel_filterbank(std::size_t n_mels, std::size_t n_bins, int sample_rate) {
  if (n_mels == 0 || n_bins < 2) throw ConfigError("mel_filterbank: need n_mels >= 1 and n_bins >= 2");
  const double nyquist = sample_rate / 2.0;
  const double top = hz_to_mel(nyquist);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  const std::size_t n_fft = 2 * (n_bins - 1);
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_bins;
  fb.weights.assign(n_mels * n_bins, 0.0);
  fb.center_hz.assign(edges.begin() + 1, edges.end() - 1);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    const double norm = 2.0 / (hi - lo);
    bool any = false;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      const double w = std::max(0.0, std::min(rise, fall));
      if (w > 0.0) any = true;
      fb.weights[m * n_bins + k] = w * norm;
    }
    if (!any) {
      throw ConfigError("mel_filterbank: band " + std::to_string(m) + " of " +
                        std::to_string(n_mels) + " covers no FFT bin; too many mel bands");
    }
  }
  return fb;
}

std::vector<double> log_mel_values(const Spectrogram& spec, const MelFilterbank& fb,
                                   std::size_t n_frames) {
  if (fb.n_bins != spec.n_bins) throw DimensionError("log_mel: filterbank / spectrogram bin mismatch");
  std::vector<double> out(fb.n_mels * n_frames, std::log(kLogFloor));
  const std::size_t used = std::min(n_frames, spec.n_frames);
  std::vector<double> acc(used);
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double w = fb.weights[m * fb.n_bins + k];
      if (w == 0.0) continue;
      const double* row = spec.power.data() + k * spec.n_frames;
      for (std::size_t t = 0; t < used; ++t) acc[t] += w * row[t];
    }
    for (std::size_t t = 0; t < used; ++t) out[m * n_frames + t] = std::log(std::max(acc[t], kLogFloor));
  }
  return out;
}

LogMelFeatures log_mel(const Spectrogram& spec, const MelFilterbank& fb, std::size_t n_frames) {
  const auto v = log_mel_values(spec, fb, n_frames);
  LogMelFeatures out;
  out.n_mels = fb.n_mels;
  out.n_frames = n_frames;
  out.values.assign(v.begin(), v.end());
  return out;
}

LogMelFeatures log_mel(const AudioSegment& seg, std::size_t n_frames) {
  static const MelFilterbank fb = mel_filterbank();
  return log_mel(stft_power(seg), fb, n_frames);
}

LogMelFeatures extract_features(const RawAudio& raw) { return log_mel(preprocess(raw)); }

std::vector<std::uint8_t> encode_features(const LogMelFeatures& f) {
  if (f.values.size() != f.n_mels * f.n_frames) throw DimensionError("encode_features: size mismatch");
  std::vector<std::uint8_t> out{'A', 'S', 'C', 'F', 1};
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put_u32(static_cast<std::uint32_t>(f.n_mels));
  put_u32(static_cast<std::uint32_t>(f.n_frames));
  out.reserve(out.size() + 4 * f.values.size());
  for (float v : f.values) {
    std::uint32_t u;
    std::memcpy(&u, &v, sizeof u);
    put_u32(u);
  }
  return out;
}

LogMelFeatures decode_features(std::span<const std::uint8_t> b) {
  if (b.size() < 13 || std::memcmp(b.data(), "ASCF", 4) != 0)
    throw FormatError("feature cache: missing ASCF magic");
  if (b[4] != 1) throw FormatError("feature cache: unsupported version " + std::to_string(b[4]));
  auto u32 = [&](std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
  };
  LogMelFeatures f;
  f.n_mels = u32(5);
  f.n_frames = u32(9);
  const std::size_t count = f.n_mels * f.n_frames;
  if (b.size() != 13 + 4 * count) {
    throw FormatError("feature cache: expected " + std::to_string(13 + 4 * count) + " bytes, got " +
                      std::to_string(b.size()));
  }
  f.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t u = u32(13 + 4 * i);
    std::memcpy(&f.values[i], &u, sizeof u);
  }
  return f;
}

void write_features(const std::filesystem::path& path, const LogMelFeatures& f) {
  const auto bytes = encode_features(f);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

LogMelFeatures read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_features(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

BandStats compute_band_stats(std::span<const LogMelFeatures* const> features) {
  if (features.empty()) throw InputError("compute_band_stats: no features");
  const std::size_t n_mels = features.front()->n_mels;
  BandStats s;
  s.mean.assign(n_mels, 0.0);
  s.stddev.assign(n_mels, 0.0);
  double count = 0.0;
  for (const auto* f : features) {
    if (f->n_mels != n_mels) throw DimensionError("compute_band_stats: mixed band counts");
    for (std::size_t m = 0; m < n_mels; ++m)
      for (std::size_t t = 0; t < f->n_frames; ++t) s.mean[m] += f->at(m, t);
    count += static_cast<double>(f->n_frames);
  }
  for (double& m : s.mean) m /= count;
  for (const auto* f : features)
    for (std::size_t m = 0; m < n_mels; ++m)
      for (std::size_t t = 0; t < f->n_frames; ++t) {
        const double d = f->at(m, t) - s.mean[m];
        s.stddev[m] += d * d;
      }
  for (double& v : s.stddev) v = std::max(std::sqrt(v / count), 1e-6);
  return s;
}

void standardize(LogMelFeatures& f, const BandStats& stats) {
  if (stats.mean.size() != f.n_mels) throw DimensionError("standardize: band count mismatch");
  for (std::size_t m = 0; m < f.n_mels; ++m) {
    const double mu = stats.mean[m], sd = stats.stddev[m];
    for (std::size_t t = 0; t < f.n_frames; ++t) {
      float& v = f.values[m * f.n_frames + t];
      v = static_cast<float>((v - mu) / sd);
    }
  }
}

}  // namespace ascnet
