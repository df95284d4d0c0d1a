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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ascnet {

// Decoded audio before preprocessing. Samples are interleaved by channel
// and scaled to [-1, 1] (integer PCM is divided by 2^(bits-1)).
struct RawAudio {
  int sample_rate = 0;
  int channels = 0;
  std::vector<float> samples;

  std::size_t frames() const { return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0; }
};

// RIFF/WAVE with PCM16, PCM24 or IEEE float32 data (plain or
// WAVE_FORMAT_EXTENSIBLE), 1 or 2 channels. Throws FormatError naming the
// byte offset of the first problem.
RawAudio decode_wav(std::span<const std::uint8_t> bytes);
RawAudio read_wav(const std::filesystem::path& path);

// PCM16 encoding with round-to-nearest and saturation at the int16 range.
std::vector<std::uint8_t> encode_wav_pcm16(const RawAudio& audio);
void write_wav_pcm16(const std::filesystem::path& path, const RawAudio& audio);

}  // namespace ascnet
