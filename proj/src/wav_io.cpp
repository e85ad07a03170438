// Copyright 2026 The GRIDS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "grids/wav_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace grids {

namespace fs = std::filesystem;

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

Waveform read_wav(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::vector<std::uint8_t> b{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::string where = path.string();
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw InputError(where + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  for (std::size_t pos = 12; pos + 8 <= b.size();) {
    const std::uint32_t size = le32(b.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) throw InputError(where + ": chunk exceeds file size");
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) throw InputError(where + ": short fmt chunk");
      format = le16(b.data() + body);
      channels = le16(b.data() + body + 2);
      rate = le32(b.data() + body + 4);
      bits = le16(b.data() + body + 14);
      if (format == kFormatExtensible && size >= 26) format = le16(b.data() + body + 24);
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      data = b.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1u);
  }
  if (format == 0) throw InputError(where + ": missing fmt chunk");
  if (data == nullptr) throw InputError(where + ": missing data chunk");
  if (channels != 1) throw InputError(where + ": expected mono audio, got " + std::to_string(channels) + " channels");

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    w.samples.resize(data_size / 2);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      w.samples[i] = static_cast<std::int16_t>(le16(data + 2 * i)) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    w.samples.resize(data_size / 4);
    for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = std::bit_cast<float>(le32(data + 4 * i));
  } else {
    throw InputError(where + ": unsupported encoding (format " + std::to_string(format) + ", " +
                     std::to_string(bits) + " bits)");
  }
  return w;
}

void write_wav(const Waveform& wav, const fs::path& path, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_size = static_cast<std::uint32_t>(wav.samples.size() * (bits / 8));
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, pcm ? kFormatPcm : kFormatFloat);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(wav.sample_rate));
  put32(out, static_cast<std::uint32_t>(wav.sample_rate) * (bits / 8));
  put16(out, bits / 8);
  put16(out, bits);
  put_tag(out, "data");
  put32(out, data_size);
  for (double s : wav.samples) {
    if (pcm) {
      const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw InputError("write failed: " + path.string());
}

}  // namespace grids
