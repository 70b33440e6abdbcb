// include/dereverb/archive.h

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

#ifndef DEREVERB_ARCHIVE_H_
#define DEREVERB_ARCHIVE_H_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dereverb/tensor.h"

namespace dereverb {

// Binary container used for checkpoints and attention dumps.
//
// Layout: one line of compact JSON terminated by '\n', then the payloads of
// all tensors concatenated as little-endian IEEE-754 doubles. The header has
// the form
//   {"format": "dereverb-tensors", "version": 1, "meta": {...},
//    "tensors": [{"name": ..., "shape": [...], "offset": bytes}, ...]}
// where offsets count from the first payload byte.
struct TensorArchive {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  void Add(std::string name, Tensor tensor);
  // Throws IoError when the name is missing.
  const Tensor& Get(const std::string& name) const;
  bool Contains(const std::string& name) const;
};

void WriteArchive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive ReadArchive(const std::filesystem::path& path);

}  // namespace dereverb

#endif  // DEREVERB_ARCHIVE_H_
