// src/selftest.cc

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

#include "dereverb/selftest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dereverb/dsp.h"
#include "dereverb/gradcheck.h"
#include "dereverb/model.h"

namespace dereverb {
namespace {

std::vector<double> Uniform(std::size_t n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

std::string Sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

SelfCheck StftRoundTrip() {
  const StftConfig cfg;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Waveform w;
    w.samples = Uniform(12000 + 37 * seed, seed, -1, 1);
    const Waveform back = Istft(Stft(w, cfg));
    // The first and last window are not fully overlapped.
    for (std::size_t i = cfg.window_len; i + cfg.window_len < back.size(); ++i)
      worst = std::max(worst, std::abs(back.samples[i] - w.samples[i]));
  }
  return {"stft round trip", worst < 1e-9, "max abs error " + Sci(worst)};
}

SelfCheck PositionalEncodingCheck() {
  const std::size_t p = 768;
  const Tensor pe = PositionalEncoding(64, p);
  double worst = 0;
  for (std::size_t pos = 0; pos < 64; ++pos) {
    for (std::size_t i = 0; i < p / 2; ++i) {
      const double w = std::exp(-2.0 * i * std::log(10000.0) / p);
      worst = std::max(worst, std::abs(pe.at(pos, 2 * i) - std::sin(pos * w)));
      worst = std::max(worst, std::abs(pe.at(pos, 2 * i + 1) - std::cos(pos * w)));
    }
  }
  return {"positional encoding", worst < 1e-12, "max abs error " + Sci(worst)};
}

std::size_t LstmCount(std::size_t in, std::size_t cells) {
  return 2 * 4 * (in * cells + cells * cells + cells);
}

// Counts from layer arithmetic, independent of the parameter store.
std::size_t ExpectedCount(PreseqKind pk, EncoderKind ek) {
  const std::size_t p = 768, d = 240, f = 2048, c = 1024;
  const std::size_t trunk = 64 * 11 * 10 + 64;
  const std::size_t flat = 64 * ((d - 10) / 5 + 1);
  std::size_t pre = 0;
  switch (pk) {
    case PreseqKind::kDef: pre = d * p; break;
    case PreseqKind::kCnn2d: pre = trunk + flat * p + p; break;
    case PreseqKind::kCnn1d: pre = p * d * 11; break;
    case PreseqKind::kLstm: pre = LstmCount(d, p / 2); break;
    case PreseqKind::kCl: pre = trunk + flat * (p / 2) + p / 2 + LstmCount(p / 2, p / 2); break;
  }
  const std::size_t layer = 4 * (p * p + p) + (p * f + f) + (f * p + p) + 4 * p;
  const std::size_t enc = ek == EncoderKind::kBert ? 3 * layer + 2 * p : LstmCount(p, c);
  const std::size_t e_dim = ek == EncoderKind::kBert ? p : 2 * c;
  return pre + enc + e_dim * 256 + 256 + 256 * d + d;
}

SelfCheck ParamCountCheck() {
  std::string bad;
  for (PreseqKind pk : {PreseqKind::kDef, PreseqKind::kCnn2d, PreseqKind::kCnn1d,
                        PreseqKind::kLstm, PreseqKind::kCl}) {
    for (EncoderKind ek : {EncoderKind::kBert, EncoderKind::kBlstm}) {
      const DereverbModel m(ModelConfig::Full(pk, ek));
      const std::size_t got = m.CountParams().total();
      if (got != ExpectedCount(pk, ek) || got != m.params().Count())
        bad += (bad.empty() ? "" : ", ") + m.config().Label();
    }
  }
  return {"parameter counts", bad.empty(), bad.empty() ? "10 variants" : "mismatch: " + bad};
}

SelfCheck GradientCheck(PreseqKind pk, EncoderKind ek) {
  auto cfg = ModelConfig::Reduced(pk, ek);
  cfg.p_dim = 16;
  cfg.a_num = 2;
  cfg.f_dim = 24;
  cfg.c_num = 6;
  cfg.conv_channels = 2;
  cfg.seed = 5;
  DereverbModel m(cfg);
  std::uint64_t seed = 11;
  for (const auto& [name, t] : m.params().entries()) {
    Tensor w = t;
    auto v = Uniform(w.numel(), ++seed, -0.3, 0.3);
    if (name.ends_with("/g"))
      for (double& g : v) g += 1.0;
    std::copy(v.begin(), v.end(), w.mutable_data().begin());
  }
  const Tensor x({4, 240}, Uniform(4 * 240, 101, -1, 1));
  const Tensor target({4, 240}, Uniform(4 * 240, 102, -1, 1));
  const auto r = CheckGradients([&] { return MeanSquaredError(m.Forward(x).prediction, target); },
                                m.params().tensors(), 3, 1e-5, 1e-5);
  return {"gradients " + cfg.Label(), r.max_rel_error < 1e-4,
          "max rel error " + Sci(r.max_rel_error) + " over " + std::to_string(r.checked)};
}

}  // namespace

std::vector<SelfCheck> RunSelfTest(std::ostream* log) {
  std::vector<SelfCheck> out;
  auto run = [&](SelfCheck c) {
    if (log) *log << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << std::endl;
    out.push_back(std::move(c));
  };
  run(StftRoundTrip());
  run(PositionalEncodingCheck());
  run(ParamCountCheck());
  run(GradientCheck(PreseqKind::kDef, EncoderKind::kBert));
  run(GradientCheck(PreseqKind::kCl, EncoderKind::kBlstm));
  return out;
}

}  // namespace dereverb
