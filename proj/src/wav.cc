// src/wav.cc

// Copyright 2026 The dereverb Authors.
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

#include "dereverb/wav.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "dereverb/errors.h"

namespace dereverb {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t ReadU32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t ReadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void PutU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Waveform ReadWav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE") {
    throw IoError("'" + name + "' is not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    const std::size_t size = ReadU32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && id != "data") {
      throw IoError("'" + name + "': chunk '" + id + "' runs past end of file");
    }
    if (id == "fmt ") {
      if (size < 16) throw IoError("'" + name + "': short fmt chunk");
      format = ReadU16(&bytes[body]);
      channels = ReadU16(&bytes[body + 2]);
      rate = ReadU32(&bytes[body + 4]);
      bits = ReadU16(&bytes[body + 14]);
      if (format == kFormatExtensible && size >= 26) format = ReadU16(&bytes[body + 24]);
    } else if (id == "data") {
      data = &bytes[body];
      data_size = std::min(size, bytes.size() - body);
    }
    pos = body + size + (size & 1);
  }
  if (data == nullptr || rate == 0) throw IoError("'" + name + "': missing fmt or data chunk");
  if (channels != 1) {
    throw IoError("'" + name + "': expected mono audio, found " + std::to_string(channels) +
                  " channels");
  }
  Waveform w;
  w.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    w.samples.resize(data_size / 2);
    for (std::size_t i = 0; i < w.samples.size(); ++i)
      w.samples[i] = static_cast<std::int16_t>(ReadU16(data + 2 * i)) / 32768.0;
  } else if (format == kFormatFloat && bits == 32) {
    w.samples.resize(data_size / 4);
    for (std::size_t i = 0; i < w.samples.size(); ++i)
      w.samples[i] = std::bit_cast<float>(ReadU32(data + 4 * i));
  } else {
    throw IoError("'" + name + "': unsupported encoding (format " + std::to_string(format) +
                  ", " + std::to_string(bits) + " bits)");
  }
  return w;
}

void WriteWav(const std::filesystem::path& path, const Waveform& w, WavEncoding encoding) {
  w.Validate();
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(w.sample_rate));
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t format = encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t bytes_per_sample = bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(w.size() * bytes_per_sample);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  PutU32(out, 36 + data_size);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, format);
  PutU16(out, 1);
  PutU32(out, rate);
  PutU32(out, rate * bytes_per_sample);
  PutU16(out, static_cast<std::uint16_t>(bytes_per_sample));
  PutU16(out, bits);
  out += "data";
  PutU32(out, data_size);
  for (double s : w.samples) {
    if (encoding == WavEncoding::kPcm16) {
      const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      PutU16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace dereverb
