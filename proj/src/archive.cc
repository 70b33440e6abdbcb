// src/archive.cc

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

#include "dereverb/archive.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dereverb/errors.h"

namespace dereverb {

namespace {

constexpr const char* kFormat = "dereverb-tensors";
constexpr int kVersion = 1;

void EncodeLittleEndian(double value, char* out) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
}

double DecodeLittleEndian(const char* in) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void TensorArchive::Add(std::string name, Tensor tensor) {
  tensors.emplace_back(std::move(name), std::move(tensor));
}

const Tensor& TensorArchive::Get(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw IoError("archive has no tensor named '" + name + "'");
}

bool TensorArchive::Contains(const std::string& name) const {
  for (const auto& entry : tensors)
    if (entry.first == name) return true;
  return false;
}

void WriteArchive(const std::filesystem::path& path, const TensorArchive& archive) {
  nlohmann::json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += 8 * t.numel();
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << header.dump() << '\n';
  std::vector<char> buffer;
  for (const auto& entry : archive.tensors) {
    auto data = entry.second.data();
    buffer.resize(8 * data.size());
    for (std::size_t i = 0; i < data.size(); ++i) EncodeLittleEndian(data[i], &buffer[8 * i]);
    os.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  }
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

TensorArchive ReadArchive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line)) throw IoError("'" + path.string() + "' is empty");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path.string() + "': malformed header: " + e.what());
  }
  if (header.value("format", "") != kFormat || header.value("version", 0) != kVersion) {
    throw IoError("'" + path.string() + "' is not a dereverb tensor archive");
  }
  const std::streampos payload_start = is.tellg();
  TensorArchive archive;
  archive.meta = header.value("meta", nlohmann::json::object());
  std::vector<char> buffer;
  for (const auto& entry : header.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    const std::size_t n = NumElements(shape);
    buffer.resize(8 * n);
    is.seekg(payload_start + static_cast<std::streamoff>(offset));
    is.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (!is) throw IoError("'" + path.string() + "' is truncated");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = DecodeLittleEndian(&buffer[8 * i]);
    archive.Add(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
  }
  return archive;
}

}  // namespace dereverb
