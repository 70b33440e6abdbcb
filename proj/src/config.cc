// src/config.cc

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

#include "dereverb/config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dereverb/errors.h"

namespace dereverb {

const std::string* KeyValues::Find(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

void KeyValues::Set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t ToSize(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config: " + key + " expects a non-negative integer, got '" + v + "'");
  return out;
}

double ToDouble(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  return out;
}

// Shortest text that parses back to the same double.
std::string Num(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

KeyValues ParseKeyValues(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (Trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (kv.Find(key)) throw ConfigError("config: key '" + key + "' given twice");
    kv.entries.emplace_back(key, value);
  }
  return kv;
}

KeyValues ReadKeyValueFile(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return ParseKeyValues(ss.str());
}

void ApplyRunConfig(const KeyValues& kv, ModelConfig& model, TrainConfig& train) {
  if (const auto* preset = kv.Find("preset")) {
    if (*preset == "full") model = ModelConfig::Full(model.preseq, model.encoder);
    else if (*preset == "reduced") model = ModelConfig::Reduced(model.preseq, model.encoder);
    else throw ConfigError("config: preset must be full or reduced, got '" + *preset + "'");
  }
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto size_field = [](std::size_t& f) -> Setter {
    return [&f](const std::string& k, const std::string& v) { f = ToSize(k, v); };
  };
  auto double_field = [](double& f) -> Setter {
    return [&f](const std::string& k, const std::string& v) { f = ToDouble(k, v); };
  };
  const std::map<std::string, Setter> setters = {
      {"preset", [](const std::string&, const std::string&) {}},
      {"preseq", [&](const std::string&, const std::string& v) { model.preseq = ParsePreseq(v); }},
      {"encoder", [&](const std::string&, const std::string& v) { model.encoder = ParseEncoder(v); }},
      {"d_rate", size_field(model.d_rate)},
      {"p_dim", size_field(model.p_dim)},
      {"a_num", size_field(model.a_num)},
      {"f_dim", size_field(model.f_dim)},
      {"l_num", size_field(model.l_num)},
      {"c_num", size_field(model.c_num)},
      {"conv_channels", size_field(model.conv_channels)},
      {"model_seed", [&](const std::string& k, const std::string& v) { model.seed = ToSize(k, v); }},
      {"total_steps", size_field(train.total_steps)},
      {"warmup_frac", double_field(train.warmup_frac)},
      {"peak_lr", double_field(train.peak_lr)},
      {"beta1", double_field(train.beta1)},
      {"beta2", double_field(train.beta2)},
      {"adam_eps", double_field(train.adam_eps)},
      {"clip_norm", double_field(train.clip_norm)},
      {"batch_size", size_field(train.batch_size)},
      {"max_steps_per_batch", size_field(train.max_steps_per_batch)},
      {"valid_every", size_field(train.valid_every)},
      {"checkpoint_every", size_field(train.checkpoint_every)},
      {"seed", [&](const std::string& k, const std::string& v) { train.seed = ToSize(k, v); }},
      {"mask_half_width",
       [&](const std::string& k, const std::string& v) {
         if (v == "none") train.mask_half_width.reset();
         else train.mask_half_width = ToSize(k, v);
       }},
  };
  std::string unknown;
  for (const auto& [k, v] : kv.entries)
    if (!setters.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  if (!unknown.empty()) throw ConfigError("config: unknown keys: " + unknown);
  for (const auto& [k, v] : kv.entries) setters.at(k)(k, v);
  model.Validate();
  train.Validate();
}

std::string FormatRunConfig(const ModelConfig& m, const TrainConfig& t) {
  std::ostringstream os;
  os << "preseq = " << PreseqName(m.preseq) << '\n'
     << "encoder = " << EncoderName(m.encoder) << '\n'
     << "d_rate = " << m.d_rate << '\n'
     << "p_dim = " << m.p_dim << '\n'
     << "a_num = " << m.a_num << '\n'
     << "f_dim = " << m.f_dim << '\n'
     << "l_num = " << m.l_num << '\n'
     << "c_num = " << m.c_num << '\n'
     << "conv_channels = " << m.conv_channels << '\n'
     << "model_seed = " << m.seed << '\n'
     << "total_steps = " << t.total_steps << '\n'
     << "warmup_frac = " << Num(t.warmup_frac) << '\n'
     << "peak_lr = " << Num(t.peak_lr) << '\n'
     << "beta1 = " << Num(t.beta1) << '\n'
     << "beta2 = " << Num(t.beta2) << '\n'
     << "adam_eps = " << Num(t.adam_eps) << '\n'
     << "clip_norm = " << Num(t.clip_norm) << '\n'
     << "batch_size = " << t.batch_size << '\n'
     << "max_steps_per_batch = " << t.max_steps_per_batch << '\n'
     << "valid_every = " << t.valid_every << '\n'
     << "checkpoint_every = " << t.checkpoint_every << '\n'
     << "seed = " << t.seed << '\n'
     << "mask_half_width = "
     << (t.mask_half_width ? std::to_string(*t.mask_half_width) : std::string("none")) << '\n';
  return os.str();
}

}  // namespace dereverb
