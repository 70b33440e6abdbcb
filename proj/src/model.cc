// src/model.cc

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

#include "dereverb/model.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "dereverb/errors.h"
#include "gemm.h"

namespace dereverb {

using internal::GemmAccumulate;
using internal::TransposeInto;

Tensor StackedFrames::ToTensor() const { return Tensor({steps, dim}, data); }

StackedFrames StackFrames(const LogMelSpectrogram& m, std::size_t d_rate) {
  if (m.frames == 0) throw ContractError("stack_frames: empty spectrogram");
  if (d_rate == 0) throw ConfigError("stack_frames: d_rate must be >= 1");
  StackedFrames s;
  s.r_dim = m.bins;
  s.d_rate = d_rate;
  s.dim = m.bins * d_rate;
  s.orig_len = m.frames;
  s.steps = (m.frames + d_rate - 1) / d_rate;
  s.data.resize(s.steps * s.dim);
  for (std::size_t i = 0; i < s.steps; ++i) {
    for (std::size_t j = 0; j < d_rate; ++j) {
      const std::size_t t = std::min(i * d_rate + j, m.frames - 1);
      std::copy_n(&m.data[t * m.bins], m.bins, &s.data[i * s.dim + j * m.bins]);
    }
  }
  return s;
}

LogMelSpectrogram UnstackFrames(std::span<const double> stacked, std::size_t rows,
                                std::size_t r_dim, std::size_t d_rate, std::size_t orig_len) {
  if (stacked.size() != rows * r_dim * d_rate)
    throw DimensionError("unstack_frames: data size does not match rows x dim");
  if (orig_len > rows * d_rate)
    throw DimensionError("unstack_frames: orig_len exceeds available frames");
  LogMelSpectrogram m;
  m.frames = orig_len;
  m.bins = r_dim;
  m.data.assign(stacked.begin(), stacked.begin() + orig_len * r_dim);
  return m;
}

LogMelSpectrogram UnstackFrames(const StackedFrames& s) {
  return UnstackFrames(s.data, s.steps, s.r_dim, s.d_rate, s.orig_len);
}

Tensor PositionalEncoding(std::size_t s_len, std::size_t p_dim) {
  if (p_dim == 0 || p_dim % 2 != 0)
    throw ConfigError("positional_encoding: p_dim must be even, got " + std::to_string(p_dim));
  std::vector<double> pe(s_len * p_dim);
  for (std::size_t pos = 0; pos < s_len; ++pos) {
    for (std::size_t i = 0; i < p_dim / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, 2.0 * i / static_cast<double>(p_dim));
      pe[pos * p_dim + 2 * i] = std::sin(angle);
      pe[pos * p_dim + 2 * i + 1] = std::cos(angle);
    }
  }
  return Tensor({s_len, p_dim}, std::move(pe));
}

// ---------------------------------------------------------------------------

std::string PreseqName(PreseqKind kind) {
  switch (kind) {
    case PreseqKind::kDef: return "def";
    case PreseqKind::kCnn2d: return "cnn2d";
    case PreseqKind::kCnn1d: return "cnn1d";
    case PreseqKind::kLstm: return "lstm";
    case PreseqKind::kCl: return "cl";
  }
  return "?";
}

std::string EncoderName(EncoderKind kind) {
  return kind == EncoderKind::kBert ? "bert" : "blstm";
}

PreseqKind ParsePreseq(const std::string& name) {
  for (auto k : {PreseqKind::kDef, PreseqKind::kCnn2d, PreseqKind::kCnn1d, PreseqKind::kLstm,
                 PreseqKind::kCl})
    if (PreseqName(k) == name) return k;
  throw ConfigError("unknown preseq '" + name + "' (def|cnn2d|cnn1d|lstm|cl)");
}

EncoderKind ParseEncoder(const std::string& name) {
  if (name == "bert") return EncoderKind::kBert;
  if (name == "blstm") return EncoderKind::kBlstm;
  throw ConfigError("unknown encoder '" + name + "' (bert|blstm)");
}

namespace {
constexpr std::size_t kConvKh = 11, kConvKw = 10, kConvStrideW = 5, kConvPadH = 5;
constexpr std::size_t kConv1dKernel = 11, kConv1dPad = 5;
constexpr std::size_t kDecoderHidden = 256;
constexpr double kInitStd = 0.02;
}  // namespace

std::size_t ModelConfig::conv_flat_dim() const {
  if (d_dim() < kConvKw) return 0;
  return conv_channels * ((d_dim() - kConvKw) / kConvStrideW + 1);
}

std::string ModelConfig::Label() const {
  std::string p = PreseqName(preseq), e = EncoderName(encoder);
  // "cnn2d" -> "CNN2d": only the letters before the digit are capitalized.
  for (char& c : p) {
    if (std::isdigit(static_cast<unsigned char>(c))) break;
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  std::transform(e.begin(), e.end(), e.begin(), ::toupper);
  return p + "-" + e;
}

void ModelConfig::Validate() const {
  if (r_dim == 0 || d_rate == 0 || p_dim == 0 || c_num == 0)
    throw ConfigError("model: r_dim, d_rate, p_dim and c_num must be positive");
  if (d_dim() < kConvKw && (preseq == PreseqKind::kCnn2d || preseq == PreseqKind::kCl))
    throw ConfigError("model: d_dim too small for the 2-D conv trunk");
  if ((preseq == PreseqKind::kCnn2d || preseq == PreseqKind::kCl) && conv_channels == 0)
    throw ConfigError("model: conv_channels must be positive");
  if (p_dim % 2 != 0) throw ConfigError("model: p_dim must be even");
  if (encoder == EncoderKind::kBert) {
    if (a_num == 0 || p_dim % a_num != 0)
      throw ConfigError("model: p_dim " + std::to_string(p_dim) + " not divisible by a_num " +
                        std::to_string(a_num));
    if (f_dim == 0 || l_num == 0) throw ConfigError("model: f_dim and l_num must be positive");
  }
}

nlohmann::json ModelConfig::ToJson() const {
  return {{"preseq", PreseqName(preseq)}, {"encoder", EncoderName(encoder)},
          {"r_dim", r_dim},   {"d_rate", d_rate}, {"p_dim", p_dim},
          {"a_num", a_num},   {"f_dim", f_dim},   {"l_num", l_num},
          {"c_num", c_num},   {"conv_channels", conv_channels}, {"seed", seed}};
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.preseq = ParsePreseq(j.at("preseq").get<std::string>());
    c.encoder = ParseEncoder(j.at("encoder").get<std::string>());
    c.r_dim = j.at("r_dim").get<std::size_t>();
    c.d_rate = j.at("d_rate").get<std::size_t>();
    c.p_dim = j.at("p_dim").get<std::size_t>();
    c.a_num = j.at("a_num").get<std::size_t>();
    c.f_dim = j.at("f_dim").get<std::size_t>();
    c.l_num = j.at("l_num").get<std::size_t>();
    c.c_num = j.at("c_num").get<std::size_t>();
    c.conv_channels = j.at("conv_channels").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.Validate();
  return c;
}

ModelConfig ModelConfig::Full(PreseqKind preseq, EncoderKind encoder) {
  ModelConfig c;
  c.preseq = preseq;
  c.encoder = encoder;
  return c;
}

ModelConfig ModelConfig::Reduced(PreseqKind preseq, EncoderKind encoder) {
  ModelConfig c = Full(preseq, encoder);
  c.p_dim = 128;
  c.a_num = 4;
  c.f_dim = 512;
  c.l_num = 1;
  c.c_num = 256;
  return c;
}

// ---------------------------------------------------------------------------

void ParamStore::Add(std::string name, Tensor t) {
  if (Contains(name)) throw ContractError("param store: duplicate name " + name);
  entries_.emplace_back(std::move(name), std::move(t));
}

const Tensor& ParamStore::Get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("param store: no parameter named " + name);
}

bool ParamStore::Contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

std::size_t ParamStore::Count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_)
    if (name.starts_with(prefix)) n += t.numel();
  return n;
}

namespace {

// Seed derived from the model seed and the parameter name, so adding a
// parameter never shifts the initial values of the others.
std::uint64_t ParamSeed(std::uint64_t seed, const std::string& name) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : name) h = (h ^ ch) * 1099511628211ull;
  std::uint64_t z = h + seed * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Initializer {
 public:
  Initializer(ParamStore& store, std::uint64_t seed) : store_(store), seed_(seed) {}

  void Weight(const std::string& name, Shape shape) {
    store_.Add(name, InitNormal(std::move(shape), 0.0, kInitStd, ParamSeed(seed_, name)));
  }
  void Constant(const std::string& name, std::size_t n, double v) {
    store_.Add(name, Tensor::Full({n}, v, true));
  }
  void Dense(const std::string& prefix, std::size_t in, std::size_t out, bool bias = true) {
    Weight(prefix + "/w", {in, out});
    if (bias) Constant(prefix + "/b", out, 0.0);
  }
  void Norm(const std::string& prefix, std::size_t n) {
    Constant(prefix + "/g", n, 1.0);
    Constant(prefix + "/b", n, 0.0);
  }
  void Lstm(const std::string& prefix, std::size_t in, std::size_t cells) {
    for (const char* dir : {"/fwd", "/bwd"}) {
      Weight(prefix + dir + "/w", {in, 4 * cells});
      Weight(prefix + dir + "/u", {cells, 4 * cells});
      Constant(prefix + dir + "/b", 4 * cells, 0.0);
    }
  }
  void ConvTrunk(const ModelConfig& cfg, std::size_t out) {
    Weight("preseq/conv/k", {cfg.conv_channels, 1, kConvKh, kConvKw});
    Constant("preseq/conv/b", cfg.conv_channels, 0.0);
    Dense("preseq/dense", cfg.conv_flat_dim(), out);
  }

 private:
  ParamStore& store_;
  std::uint64_t seed_;
};

}  // namespace

ParamStore InitParams(const ModelConfig& cfg) {
  cfg.Validate();
  ParamStore store;
  Initializer init(store, cfg.seed);
  const std::size_t p = cfg.p_dim, d = cfg.d_dim();
  switch (cfg.preseq) {
    case PreseqKind::kDef: init.Dense("preseq/proj", d, p, false); break;
    case PreseqKind::kCnn2d: init.ConvTrunk(cfg, p); break;
    case PreseqKind::kCnn1d: init.Weight("preseq/conv1d/k", {p, d, kConv1dKernel}); break;
    case PreseqKind::kLstm: init.Lstm("preseq/lstm", d, p / 2); break;
    case PreseqKind::kCl:
      init.ConvTrunk(cfg, p / 2);
      init.Lstm("preseq/lstm", p / 2, p / 2);
      break;
  }
  if (cfg.encoder == EncoderKind::kBert) {
    for (std::size_t l = 0; l < cfg.l_num; ++l) {
      const std::string pre = "encoder/layer" + std::to_string(l);
      init.Norm(pre + "/ln1", p);
      for (const char* m : {"/attn/q", "/attn/k", "/attn/v", "/attn/o"}) init.Dense(pre + m, p, p);
      init.Norm(pre + "/ln2", p);
      init.Dense(pre + "/ffn/fc1", p, cfg.f_dim);
      init.Dense(pre + "/ffn/fc2", cfg.f_dim, p);
    }
    init.Norm("encoder/final_ln", p);
  } else {
    init.Lstm("encoder/blstm", p, cfg.c_num);
  }
  init.Dense("decoder/fc1", cfg.e_dim(), kDecoderHidden);
  init.Dense("decoder/fc2", kDecoderHidden, d);
  return store;
}

// ---------------------------------------------------------------------------
// LSTM scan as a single tape node.

namespace {

double Sigm(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// xp: S x 4H input projections (bias included); u: H x 4H. Returns S x H
// hidden states in input order; `reverse` runs the recurrence from the end.
Tensor LstmScan(const Tensor& xp, const Tensor& u, bool reverse) {
  const std::size_t s = xp.dim(0), g4 = xp.dim(1), h = u.dim(0);
  if (g4 != 4 * h || u.dim(1) != g4)
    throw DimensionError("lstm: projection " + ShapeToString(xp.shape()) +
                         " does not match recurrent weights " + ShapeToString(u.shape()));
  auto order = [&](std::size_t step) { return reverse ? s - 1 - step : step; };
  std::vector<double> gates(s * g4), cell(s * h), tcell(s * h), hid(s * h);
  std::vector<double> z(g4);
  const double* x = xp.data().data();
  const double* w = u.data().data();
  for (std::size_t step = 0; step < s; ++step) {
    const std::size_t t = order(step);
    std::copy_n(x + t * g4, g4, z.data());
    const double* hprev = step ? &hid[order(step - 1) * h] : nullptr;
    const double* cprev = step ? &cell[order(step - 1) * h] : nullptr;
    if (hprev) GemmAccumulate(1, g4, h, hprev, h, w, g4, z.data(), g4);
    double* gt = &gates[t * g4];
    for (std::size_t a = 0; a < h; ++a) {
      const double i = Sigm(z[a]), f = Sigm(z[h + a]), g = std::tanh(z[2 * h + a]),
                   o = Sigm(z[3 * h + a]);
      gt[a] = i;
      gt[h + a] = f;
      gt[2 * h + a] = g;
      gt[3 * h + a] = o;
      const double c = (cprev ? f * cprev[a] : 0.0) + i * g;
      cell[t * h + a] = c;
      tcell[t * h + a] = std::tanh(c);
      hid[t * h + a] = o * tcell[t * h + a];
    }
  }
  const bool track = Tape::Current() && (xp.requires_grad() || u.requires_grad());
  Tensor out({s, h}, hid, track);
  if (!track) return out;
  Tape::Current()->Record(out, [xp, u, out, s, h, g4, reverse, gates = std::move(gates),
                                cell = std::move(cell), tcell = std::move(tcell),
                                hid = std::move(hid)]() {
    auto order = [&](std::size_t step) { return reverse ? s - 1 - step : step; };
    const double* dout = out.grad().data();
    const double* w = u.data().data();
    std::vector<double> dz(s * g4, 0.0), hprev_all(s * h, 0.0);
    std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0);
    for (std::size_t k = s; k-- > 0;) {
      const std::size_t t = order(k);
      const double* cprev = k ? &cell[order(k - 1) * h] : nullptr;
      if (k) std::copy_n(&hid[order(k - 1) * h], h, &hprev_all[t * h]);
      const double* gt = &gates[t * g4];
      double* d = &dz[t * g4];
      for (std::size_t a = 0; a < h; ++a) {
        const double i = gt[a], f = gt[h + a], g = gt[2 * h + a], o = gt[3 * h + a];
        const double tc = tcell[t * h + a];
        const double dh = dout[t * h + a] + dh_next[a];
        const double dc = dc_next[a] + dh * o * (1.0 - tc * tc);
        d[a] = dc * g * i * (1.0 - i);
        d[h + a] = cprev ? dc * cprev[a] * f * (1.0 - f) : 0.0;
        d[2 * h + a] = dc * i * (1.0 - g * g);
        d[3 * h + a] = dh * tc * o * (1.0 - o);
        dc_next[a] = dc * f;
      }
      for (std::size_t a = 0; a < h; ++a) {
        const double* row = w + a * g4;
        double acc = 0;
        for (std::size_t j = 0; j < g4; ++j) acc += row[j] * d[j];
        dh_next[a] = acc;
      }
    }
    if (xp.requires_grad()) {
      auto gx = xp.mutable_grad();
      for (std::size_t q = 0; q < dz.size(); ++q) gx[q] += dz[q];
    }
    if (u.requires_grad()) {
      std::vector<double> ht(h * s);
      TransposeInto(s, h, hprev_all.data(), ht.data());
      GemmAccumulate(h, g4, s, ht.data(), s, dz.data(), g4, u.mutable_grad().data(), g4);
    }
  });
  return out;
}

Tensor Dense(const Tensor& x, const ParamStore& p, const std::string& prefix) {
  const std::string b = prefix + "/b";
  return Linear(x, p.Get(prefix + "/w"), p.Contains(b) ? p.Get(b) : Tensor());
}

Tensor Norm(const Tensor& x, const ParamStore& p, const std::string& prefix) {
  return LayerNorm(x, p.Get(prefix + "/g"), p.Get(prefix + "/b"));
}

Tensor ConvTrunk(const Tensor& x, const ParamStore& p, const ModelConfig& cfg) {
  const std::size_t s = x.dim(0);
  Conv2dParams cp;
  cp.stride_w = kConvStrideW;
  cp.pad_h = kConvPadH;
  Tensor y = Conv2d(Reshape(x, {1, s, x.dim(1)}), p.Get("preseq/conv/k"), p.Get("preseq/conv/b"),
                    cp);
  y = Permute(Relu(y), {1, 0, 2});  // S x channels x freq
  return Dense(Reshape(y, {s, cfg.conv_flat_dim()}), p, "preseq/dense");
}

}  // namespace

Tensor BidirectionalLstm(const Tensor& x, const ParamStore& p, const std::string& prefix) {
  const Tensor fwd =
      LstmScan(Dense(x, p, prefix + "/fwd"), p.Get(prefix + "/fwd/u"), /*reverse=*/false);
  const Tensor bwd =
      LstmScan(Dense(x, p, prefix + "/bwd"), p.Get(prefix + "/bwd/u"), /*reverse=*/true);
  return ConcatCols({fwd, bwd});
}

Tensor MultiHeadAttention(const Tensor& h, const ParamStore& p, const std::string& prefix,
                          std::size_t a_num, std::vector<Tensor>* maps) {
  const std::size_t s = h.dim(0), e = h.dim(1);
  if (a_num == 0 || e % a_num != 0)
    throw ConfigError("attention: width " + std::to_string(e) + " not divisible by " +
                      std::to_string(a_num) + " heads");
  const std::size_t dh = e / a_num;
  const Tensor q = Dense(h, p, prefix + "/q");
  const Tensor k = Dense(h, p, prefix + "/k");
  const Tensor v = Dense(h, p, prefix + "/v");
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  std::vector<double> kept;
  if (maps) kept.reserve(a_num * s * s);
  for (std::size_t a = 0; a < a_num; ++a) {
    const std::size_t c0 = a * dh, c1 = c0 + dh;
    const Tensor att =
        Softmax(Scale(MatMulTransposed(SliceCols(q, c0, c1), SliceCols(k, c0, c1)), scale), 1);
    if (maps) kept.insert(kept.end(), att.data().begin(), att.data().end());
    heads.push_back(MatMul(att, SliceCols(v, c0, c1)));
  }
  if (maps) maps->emplace_back(Shape{a_num, s, s}, std::move(kept));
  return Dense(heads.size() == 1 ? heads[0] : ConcatCols(heads), p, prefix + "/o");
}

Tensor TransformerLayer(const Tensor& h, const ParamStore& p, const std::string& prefix,
                        std::size_t a_num, std::vector<Tensor>* maps) {
  Tensor x = Add(h, MultiHeadAttention(Norm(h, p, prefix + "/ln1"), p, prefix + "/attn", a_num,
                                       maps));
  const Tensor f = Dense(Relu(Dense(Norm(x, p, prefix + "/ln2"), p, prefix + "/ffn/fc1")), p,
                         prefix + "/ffn/fc2");
  return Add(x, f);
}

Tensor PreseqForward(const Tensor& x, const ParamStore& p, const ModelConfig& cfg) {
  if (x.rank() != 2 || x.dim(1) != cfg.d_dim() || x.dim(0) == 0)
    throw ConfigError("preseq: expected S x " + std::to_string(cfg.d_dim()) + " input, got " +
                      ShapeToString(x.shape()));
  switch (cfg.preseq) {
    case PreseqKind::kDef: return MatMul(x, p.Get("preseq/proj/w"));
    case PreseqKind::kCnn2d: return ConvTrunk(x, p, cfg);
    case PreseqKind::kCnn1d:
      return Transpose(
          Conv1d(Transpose(x), p.Get("preseq/conv1d/k"), Tensor(), 1, kConv1dPad));
    case PreseqKind::kLstm: return BidirectionalLstm(x, p, "preseq/lstm");
    case PreseqKind::kCl: return BidirectionalLstm(ConvTrunk(x, p, cfg), p, "preseq/lstm");
  }
  throw ConfigError("preseq: unknown variant");
}

Tensor EncoderForward(const Tensor& h, const ParamStore& p, const ModelConfig& cfg,
                      std::vector<Tensor>* maps) {
  if (cfg.encoder == EncoderKind::kBlstm) return BidirectionalLstm(h, p, "encoder/blstm");
  Tensor x = h;
  for (std::size_t l = 0; l < cfg.l_num; ++l)
    x = TransformerLayer(x, p, "encoder/layer" + std::to_string(l), cfg.a_num, maps);
  return Norm(x, p, "encoder/final_ln");
}

Tensor DecoderForward(const Tensor& h, const ParamStore& p) {
  return Dense(Relu(Dense(h, p, "decoder/fc1")), p, "decoder/fc2");
}

// ---------------------------------------------------------------------------

DereverbModel::DereverbModel(const ModelConfig& cfg) : cfg_(cfg), params_(InitParams(cfg)) {}

DereverbModel::DereverbModel(const ModelConfig& cfg, ParamStore params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.Validate();
  const ParamStore ref = InitParams(cfg_);
  for (const auto& [name, t] : ref.entries()) {
    if (!params_.Contains(name))
      throw ConfigError("model: missing parameter " + name);
    if (params_.Get(name).shape() != t.shape())
      throw ConfigError("model: parameter " + name + " has shape " +
                        ShapeToString(params_.Get(name).shape()) + ", expected " +
                        ShapeToString(t.shape()));
  }
  if (params_.entries().size() != ref.entries().size())
    throw ConfigError("model: unexpected extra parameters");
}

ModelOutput DereverbModel::Forward(const Tensor& x, bool keep_attention) const {
  ModelOutput out;
  Tensor h = PreseqForward(x, params_, cfg_);
  const bool use_pe = cfg_.encoder == EncoderKind::kBert &&
                      (cfg_.preseq == PreseqKind::kDef || cfg_.preseq == PreseqKind::kCnn2d ||
                       cfg_.preseq == PreseqKind::kCnn1d);
  if (use_pe) h = Add(h, PositionalEncoding(h.dim(0), cfg_.p_dim));
  h = EncoderForward(h, params_, cfg_, keep_attention ? &out.attention : nullptr);
  out.prediction = DecoderForward(h, params_);
  return out;
}

ParamCounts DereverbModel::CountParams() const {
  return {params_.Count("preseq/"), params_.Count("encoder/"), params_.Count("decoder/")};
}

}  // namespace dereverb
