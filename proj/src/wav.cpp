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

#include "ascnet/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ascnet/errors.hpp"

namespace ascnet {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }
  void seek(std::size_t p) { pos_ = p; }

  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) {
      throw FormatError(std::string("wav: truncated ") + what + " at byte offset " +
                        std::to_string(pos_));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    const std::uint32_t v = static_cast<std::uint32_t>(b_[pos_]) |
                            static_cast<std::uint32_t>(b_[pos_ + 1]) << 8 |
                            static_cast<std::uint32_t>(b_[pos_ + 2]) << 16 |
                            static_cast<std::uint32_t>(b_[pos_ + 3]) << 24;
    pos_ += 4;
    return v;
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(b_[pos_] | b_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }
  std::string tag(const char* what) {
    need(4, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_tag(std::vector<std::uint8_t>& out, const char* t) { out.insert(out.end(), t, t + 4); }

}  // namespace

RawAudio decode_wav(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.tag("RIFF header") != "RIFF") throw FormatError("wav: missing RIFF tag at byte offset 0");
  r.u32("RIFF size");
  if (r.tag("WAVE tag") != "WAVE") throw FormatError("wav: missing WAVE tag at byte offset 8");

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    if (r.remaining() < 8) {
      throw FormatError("wav: no data chunk before byte offset " + std::to_string(bytes.size()));
    }
    const std::size_t chunk_at = r.pos();
    const std::string id = r.tag("chunk id");
    const std::uint32_t size = r.u32("chunk size");
    const std::size_t body = r.pos();
    if (id == "fmt ") {
      if (size < 16) {
        throw FormatError("wav: fmt chunk too small at byte offset " + std::to_string(chunk_at));
      }
      r.need(size, "fmt chunk");
      format = r.u16("format tag");
      channels = r.u16("channel count");
      rate = r.u32("sample rate");
      r.u32("byte rate");
      block_align = r.u16("block align");
      bits = r.u16("bits per sample");
      if (format == kFormatExtensible) {
        if (size < 40) {
          throw FormatError("wav: extensible fmt chunk too small at byte offset " +
                            std::to_string(chunk_at));
        }
        r.u16("extension size");
        r.u16("valid bits");
        r.u32("channel mask");
        format = r.u16("sub-format");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) {
        throw FormatError("wav: data chunk before fmt chunk at byte offset " +
                          std::to_string(chunk_at));
      }
      const bool pcm = format == kFormatPcm && (bits == 16 || bits == 24);
      const bool flt = format == kFormatFloat && bits == 32;
      if (!pcm && !flt) {
        throw FormatError("wav: unsupported codec (format " + std::to_string(format) + ", " +
                          std::to_string(bits) + " bits) declared before byte offset " +
                          std::to_string(chunk_at));
      }
      if (channels < 1 || channels > 2) {
        throw FormatError("wav: unsupported channel count " + std::to_string(channels) +
                          " declared before byte offset " + std::to_string(chunk_at));
      }
      const std::size_t width = bits / 8;
      if (block_align != width * channels) {
        throw FormatError("wav: block align " + std::to_string(block_align) +
                          " inconsistent with format before byte offset " + std::to_string(chunk_at));
      }
      r.need(size, "data chunk");
      if (size % block_align != 0) {
        throw FormatError("wav: data chunk of " + std::to_string(size) +
                          " bytes is not a whole number of frames at byte offset " +
                          std::to_string(chunk_at));
      }
      RawAudio a;
      a.sample_rate = static_cast<int>(rate);
      a.channels = channels;
      a.samples.resize(size / width);
      const std::uint8_t* p = bytes.data() + body;
      for (std::size_t i = 0; i < a.samples.size(); ++i, p += width) {
        if (bits == 16) {
          const auto v = static_cast<std::int16_t>(p[0] | p[1] << 8);
          a.samples[i] = static_cast<float>(v) / 32768.0f;
        } else if (bits == 24) {
          std::int32_t v = p[0] | p[1] << 8 | p[2] << 16;
          if (v & 0x800000) v -= 0x1000000;
          a.samples[i] = static_cast<float>(v) / 8388608.0f;
        } else {
          std::uint32_t u = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                            static_cast<std::uint32_t>(p[2]) << 16 |
                            static_cast<std::uint32_t>(p[3]) << 24;
          float f;
          std::memcpy(&f, &u, sizeof f);
          a.samples[i] = f;
        }
      }
      return a;
    }
    r.seek(body);
    const std::size_t padded = size + (size & 1u);
    if (r.remaining() < padded) {
      throw FormatError("wav: truncated '" + id + "' chunk at byte offset " + std::to_string(chunk_at));
    }
    r.seek(body + padded);
  }
}

RawAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav_pcm16(const RawAudio& audio) {
  if (audio.channels < 1 || audio.channels > 2) {
    throw ConfigError("wav: cannot encode " + std::to_string(audio.channels) + " channels");
  }
  if (audio.samples.size() % static_cast<std::size_t>(audio.channels) != 0) {
    throw DimensionError("wav: sample count is not a multiple of the channel count");
  }
  const auto channels = static_cast<std::uint16_t>(audio.channels);
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * channels * 2);
  put_u16(out, static_cast<std::uint16_t>(channels * 2));
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : audio.samples) {
    const double q = std::nearbyint(static_cast<double>(s) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void write_wav_pcm16(const std::filesystem::path& path, const RawAudio& audio) {
  const auto bytes = encode_wav_pcm16(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace ascnet
