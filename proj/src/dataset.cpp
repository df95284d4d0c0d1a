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

#include "ascnet/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ascnet/errors.hpp"
#include "ascnet/rng.hpp"
#include "ascnet/wav.hpp"

namespace ascnet {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = s.find(sep, start);
    out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

std::string_view basename(std::string_view path) {
  const std::size_t slash = path.find_last_of('/');
  return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

bool is_token(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

// Second-order band-pass (constant 0 dB peak gain), direct form I.
class Biquad {
 public:
  Biquad(double centre, double q, double rate) {
    const double w = 2.0 * std::numbers::pi * centre / rate;
    const double alpha = std::sin(w) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0_ = alpha / a0;
    b2_ = -alpha / a0;
    a1_ = -2.0 * std::cos(w) / a0;
    a2_ = (1.0 - alpha) / a0;
  }
  double operator()(double x) {
    const double y = b0_ * x + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double b0_, b2_, a1_, a2_;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

constexpr std::array<std::string_view, 10> kCities = {"barcelona", "helsinki", "lisbon", "london",
                                                      "lyon",      "milan",    "paris",  "prague",
                                                      "stockholm", "vienna"};

}  // namespace

std::optional<std::size_t> scene_index(std::string_view label) {
  for (std::size_t i = 0; i < kSceneLabels.size(); ++i)
    if (kSceneLabels[i] == label) return i;
  return std::nullopt;
}

std::string ManifestRow::segment_id() const {
  std::string_view b = basename(filename);
  if (b.size() > 4 && b.substr(b.size() - 4) == ".wav") b.remove_suffix(4);
  return std::string(b);
}

std::optional<FilenameFields> parse_filename(std::string_view name, std::string* error) {
  auto fail = [&](const std::string& msg) -> std::optional<FilenameFields> {
    if (error) *error = msg;
    return std::nullopt;
  };
  std::string_view b = basename(name);
  if (b.size() <= 4 || b.substr(b.size() - 4) != ".wav")
    return fail("filename '" + std::string(name) + "' does not end in .wav");
  b.remove_suffix(4);
  const auto parts = split(b, '-');
  if (parts.size() != 5) {
    return fail("filename '" + std::string(name) +
                "' does not match scene-city-location-segment-device.wav");
  }
  for (const auto& p : parts)
    if (!is_token(p)) return fail("filename '" + std::string(name) + "' has an empty or invalid field");
  return FilenameFields{std::string(parts[0]), std::string(parts[1]), std::string(parts[2]),
                        std::string(parts[3]), std::string(parts[4])};
}

Manifest parse_manifest(std::string_view text, bool strict) {
  Manifest m;
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto& l : lines)
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  if (lines.empty()) {
    m.warnings.push_back("manifest is empty");
    return m;
  }
  const auto header = split(lines[0], '\t');
  if (header.size() < 2 || header[0] != "filename" || header[1] != "scene_label")
    throw FormatError("manifest line 1: expected header \"filename\\tscene_label\"");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    auto row_error = [&](std::string msg) {
      if (strict) throw FormatError("manifest line " + std::to_string(line_no) + ": " + msg);
      m.errors.push_back({line_no, std::move(msg)});
    };
    const auto cols = split(lines[i], '\t');
    if (cols.size() < 2) {
      row_error("expected at least 2 tab-separated columns");
      continue;
    }
    const auto label = scene_index(cols[1]);
    if (!label) {
      row_error("unknown scene label '" + std::string(cols[1]) + "'");
      continue;
    }
    std::string err;
    const auto fields = parse_filename(cols[0], &err);
    if (!fields) {
      row_error(err);
      continue;
    }
    if (fields->scene != cols[1]) {
      row_error("filename scene '" + fields->scene + "' disagrees with label '" + std::string(cols[1]) + "'");
      continue;
    }
    m.rows.push_back(ManifestRow{std::string(cols[0]), fields->scene, *label, fields->city, fields->location,
                                 fields->segment, fields->device, line_no});
  }
  return m;
}

Manifest read_manifest(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_manifest(ss.str(), strict);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string format_manifest(const std::vector<ManifestRow>& rows) {
  std::string out = "filename\tscene_label\n";
  for (const auto& r : rows) out += r.filename + "\t" + r.scene + "\n";
  return out;
}

std::vector<float> synth_signal(const SynthConfig& cfg, std::size_t cls, std::size_t location,
                                std::size_t segment) {
  const double rate = cfg.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(cfg.seconds * rate));
  CounterRng loc_rng(cfg.seed, {0x10CA7104ull, cls, location});
  CounterRng rng(cfg.seed, {0x5E6Bull, cls, location, segment});

  // Class centres are spread over about five octaves; a location detunes by
  // up to a twentieth of an octave.
  const double detune = std::exp2((loc_rng.uniform() - 0.5) * 0.1);
  const double centre = 250.0 * std::exp2(0.55 * static_cast<double>(cls)) * detune;
  const double tone_hz = centre * 1.25;
  const double mod_hz = 0.5 + 0.5 * static_cast<double>(cls);
  const double background = 0.01 * (0.5 + loc_rng.uniform());

  const double gain = std::pow(10.0, (rng.uniform() * 12.0 - 6.0) / 20.0);
  const double tone_phase = 2.0 * std::numbers::pi * rng.uniform();
  const double mod_phase = 2.0 * std::numbers::pi * rng.uniform();

  Biquad f1(centre, 4.0, rate), f2(centre, 4.0, rate);
  std::vector<float> out(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double band = f2(f1(rng.normal()));
    const double am = 1.0 + 0.8 * std::sin(2.0 * std::numbers::pi * mod_hz * t + mod_phase);
    const double tonal = 0.5 * am * std::sin(2.0 * std::numbers::pi * tone_hz * t + tone_phase);
    const double common = gain * 0.1 * (band + tonal);
    out[2 * i] = static_cast<float>(common + background * rng.normal());
    out[2 * i + 1] = static_cast<float>(0.9 * common + background * rng.normal());
  }
  return out;
}

std::vector<ManifestRow> synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.n_classes == 0 || cfg.n_classes > kNumClasses)
    throw ConfigError("synth: n_classes must be in [1, " + std::to_string(kNumClasses) + "]");
  if (cfg.locations_per_class < 4) throw ConfigError("synth: need at least 4 locations per class");
  if (cfg.per_class < cfg.locations_per_class) {
    throw ConfigError("synth: per_class (" + std::to_string(cfg.per_class) +
                      ") must be at least the number of locations per class (" +
                      std::to_string(cfg.locations_per_class) + ")");
  }
  const auto audio_dir = out_dir / "audio";
  std::error_code ec;
  std::filesystem::create_directories(audio_dir, ec);
  if (ec) throw IoError("synth: cannot create " + audio_dir.string() + ": " + ec.message());

  std::vector<ManifestRow> rows;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    for (std::size_t i = 0; i < cfg.per_class; ++i) {
      const std::size_t loc = i % cfg.locations_per_class;
      const std::size_t seg = i / cfg.locations_per_class;
      ManifestRow r;
      r.scene = std::string(kSceneLabels[c]);
      r.label = c;
      r.city = std::string(kCities[(c + loc) % kCities.size()]);
      r.location = std::to_string(loc);
      r.segment = std::to_string(seg);
      r.device = "a";
      r.filename = r.scene + "-" + r.city + "-" + r.location + "-" + r.segment + "-" + r.device + ".wav";
      r.line = rows.size() + 2;
      RawAudio audio{cfg.sample_rate, 2, synth_signal(cfg, c, loc, seg)};
      write_wav_pcm16(audio_dir / r.filename, audio);
      rows.push_back(std::move(r));
    }
  }
  const auto meta = out_dir / "meta.csv";
  std::ofstream out(meta, std::ios::binary);
  if (!out) throw IoError("synth: cannot write " + meta.string());
  out << format_manifest(rows);
  if (!out) throw IoError("synth: write failed for " + meta.string());
  return rows;
}

}  // namespace ascnet
