// include/dereverb/model.h

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

#ifndef DEREVERB_MODEL_H_
#define DEREVERB_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dereverb/dsp.h"
#include "dereverb/tensor.h"

namespace dereverb {

// ---------------------------------------------------------------------------
// Frame stacking

struct StackedFrames {
  std::size_t steps = 0;     // S
  std::size_t dim = 0;       // r_dim * d_rate
  std::size_t r_dim = 0;
  std::size_t d_rate = 0;
  std::size_t orig_len = 0;  // T
  std::vector<double> data;  // steps x dim, row-major

  Tensor ToTensor() const;
};

// Groups d_rate consecutive frames along the feature axis. A partial final
// group is padded by repeating the last frame.
StackedFrames StackFrames(const LogMelSpectrogram& m, std::size_t d_rate = 3);
// Rebuilds a rows x (r_dim * d_rate) matrix into frames and keeps the first
// orig_len of them. The result carries no normalization flag or stats.
LogMelSpectrogram UnstackFrames(std::span<const double> stacked, std::size_t rows,
                                std::size_t r_dim, std::size_t d_rate, std::size_t orig_len);
LogMelSpectrogram UnstackFrames(const StackedFrames& s);

// s_len x p_dim sinusoidal table. Throws ConfigError on odd p_dim.
Tensor PositionalEncoding(std::size_t s_len, std::size_t p_dim);

// ---------------------------------------------------------------------------
// Configuration

enum class PreseqKind { kDef, kCnn2d, kCnn1d, kLstm, kCl };
enum class EncoderKind { kBert, kBlstm };

std::string PreseqName(PreseqKind kind);    // "def", "cnn2d", ...
std::string EncoderName(EncoderKind kind);  // "bert", "blstm"
// Throws ConfigError on unknown names.
PreseqKind ParsePreseq(const std::string& name);
EncoderKind ParseEncoder(const std::string& name);

struct ModelConfig {
  PreseqKind preseq = PreseqKind::kDef;
  EncoderKind encoder = EncoderKind::kBert;
  std::size_t r_dim = 80;
  std::size_t d_rate = 3;
  std::size_t p_dim = 768;
  std::size_t a_num = 16;
  std::size_t f_dim = 2048;
  std::size_t l_num = 3;
  std::size_t c_num = 1024;
  std::size_t conv_channels = 64;  // 2-D trunk of CNN2d and CL
  std::uint64_t seed = 1;

  std::size_t d_dim() const { return r_dim * d_rate; }
  std::size_t e_dim() const { return encoder == EncoderKind::kBert ? p_dim : 2 * c_num; }
  // Width of the 2-D trunk output after flattening channels x frequency.
  std::size_t conv_flat_dim() const;
  // e.g. "DEF-BERT", "CL-BLSTM"
  std::string Label() const;
  void Validate() const;

  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);

  // Full-size dimensions.
  static ModelConfig Full(PreseqKind preseq, EncoderKind encoder);
  // Desk-scale dimensions: p_dim 128, one layer, 4 heads, f_dim 512, 256 cells.
  static ModelConfig Reduced(PreseqKind preseq, EncoderKind encoder);
};

// ---------------------------------------------------------------------------
// Parameters

// Ordered name -> tensor map. Names are "component/...", component being
// preseq, encoder or decoder.
class ParamStore {
 public:
  void Add(std::string name, Tensor t);
  // Throws ContractError when missing.
  const Tensor& Get(const std::string& name) const;
  bool Contains(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  // Total elements over names starting with `prefix`.
  std::size_t Count(const std::string& prefix = "") const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

struct ParamCounts {
  std::size_t preseq = 0;
  std::size_t encoder = 0;
  std::size_t decoder = 0;
  std::size_t total() const { return preseq + encoder + decoder; }
};

// Weights ~ N(0, 0.02²) seeded per name, biases 0, layer-norm gains 1.
ParamStore InitParams(const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Building blocks. `prefix` selects the parameter group, e.g. "encoder/layer0".

// x: S x in. Output S x 2·cells, forward half first. Weights under
// prefix/{fwd,bwd}/{w,u,b} with gate order i, f, g, o.
Tensor BidirectionalLstm(const Tensor& x, const ParamStore& p, const std::string& prefix);

// Appends one a_num x S x S tensor of attention weights to `maps` when given.
Tensor MultiHeadAttention(const Tensor& h, const ParamStore& p, const std::string& prefix,
                          std::size_t a_num, std::vector<Tensor>* maps = nullptr);
// Prenorm: h + MHA(LN(h)), then h + FFN(LN(h)).
Tensor TransformerLayer(const Tensor& h, const ParamStore& p, const std::string& prefix,
                        std::size_t a_num, std::vector<Tensor>* maps = nullptr);

Tensor PreseqForward(const Tensor& x, const ParamStore& p, const ModelConfig& cfg);
Tensor EncoderForward(const Tensor& h, const ParamStore& p, const ModelConfig& cfg,
                      std::vector<Tensor>* maps = nullptr);
Tensor DecoderForward(const Tensor& h, const ParamStore& p);

// ---------------------------------------------------------------------------

struct ModelOutput {
  Tensor prediction;               // S x d_dim, normalized stacked log-Mel
  std::vector<Tensor> attention;  // per layer, a_num x S x S (BERT only)
};

class DereverbModel {
 public:
  explicit DereverbModel(const ModelConfig& cfg);
  DereverbModel(const ModelConfig& cfg, ParamStore params);

  const ModelConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_; }
  ParamStore& mutable_params() { return params_; }

  // x: S x d_dim stacked frames.
  ModelOutput Forward(const Tensor& x, bool keep_attention = false) const;
  ParamCounts CountParams() const;

 private:
  ModelConfig cfg_;
  ParamStore params_;
};

}  // namespace dereverb

#endif  // DEREVERB_MODEL_H_
