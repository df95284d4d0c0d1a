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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ascnet {

constexpr std::size_t kNumClasses = 10;

// Scene labels in class-index order.
inline constexpr std::array<std::string_view, kNumClasses> kSceneLabels = {
    "airport",       "bus",           "metro",
    "metro_station", "park",          "public_square",
    "shopping_mall", "street_pedestrian", "street_traffic",
    "tram"};

std::optional<std::size_t> scene_index(std::string_view label);

struct ManifestRow {
  std::string filename;  // as written in the manifest, may carry a directory prefix
  std::string scene;
  std::size_t label = 0;
  std::string city;
  std::string location;
  std::string segment;
  std::string device;
  std::size_t line = 0;  // 1-based line in the manifest text

  // Recording-location identity used for fold grouping: scene-city-location.
  std::string location_id() const { return scene + "-" + city + "-" + location; }
  // File name without directory and extension; unique per segment.
  std::string segment_id() const;
};

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct Manifest {
  std::vector<ManifestRow> rows;
  std::vector<RowError> errors;
  std::vector<std::string> warnings;
};

// Parses a tab-separated manifest whose header starts with
// "filename<TAB>scene_label". Extra columns are ignored. Malformed rows are
// collected in `errors`; with strict set the first one throws FormatError.
Manifest parse_manifest(std::string_view text, bool strict = false);
Manifest read_manifest(const std::filesystem::path& path, bool strict = false);
std::string format_manifest(const std::vector<ManifestRow>& rows);

// Splits "scene-city-location-segment-device.wav" into its fields.
// Returns an error message on grammar violations.
struct FilenameFields {
  std::string scene, city, location, segment, device;
};
std::optional<FilenameFields> parse_filename(std::string_view name, std::string* error = nullptr);

struct SynthConfig {
  std::size_t n_classes = kNumClasses;
  std::size_t per_class = 16;
  std::size_t locations_per_class = 4;
  std::uint64_t seed = 0;
  double seconds = 10.0;
  int sample_rate = 48000;
};

// Writes out_dir/audio/<name>.wav (PCM16 stereo) and out_dir/meta.csv and
// returns the manifest rows in file order. Class k is band-passed noise
// around a class-specific centre plus a tone amplitude-modulated at a
// class-specific rate; each file has a random gain and phase, and each
// location a small spectral tilt.
std::vector<ManifestRow> synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

// Stereo samples of one synthetic file; exposed for tests.
std::vector<float> synth_signal(const SynthConfig& cfg, std::size_t cls, std::size_t location,
                                std::size_t segment);

}  // namespace ascnet
