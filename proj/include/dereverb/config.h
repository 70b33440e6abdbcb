// include/dereverb/config.h

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

#ifndef DEREVERB_CONFIG_H_
#define DEREVERB_CONFIG_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dereverb/model.h"
#include "dereverb/train.h"

namespace dereverb {

// Ordered key=value pairs. Lines are `key = value`; `#` starts a comment.
struct KeyValues {
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* Find(const std::string& key) const;
  void Set(const std::string& key, const std::string& value);
};

// Throws ConfigError on malformed lines and repeated keys.
KeyValues ParseKeyValues(std::string_view text);
// Throws IoError when the file cannot be read.
KeyValues ReadKeyValueFile(const std::filesystem::path& path);

// Applies model and training keys. `preset = full|reduced` is applied first
// and resets every model dimension. Throws ConfigError naming unknown keys
// and unparsable values.
void ApplyRunConfig(const KeyValues& kv, ModelConfig& model, TrainConfig& train);

// Every resolved setting as key=value lines, in a form ApplyRunConfig accepts.
std::string FormatRunConfig(const ModelConfig& model, const TrainConfig& train);

}  // namespace dereverb

#endif  // DEREVERB_CONFIG_H_
