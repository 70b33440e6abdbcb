// src/metrics.cc

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

#include "dereverb/metrics.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "dereverb/errors.h"
#include "dereverb/room_sim.h"

namespace dereverb {

double LogSpectralDistance(const Waveform& a, const Waveform& b, const LsdOptions& options) {
  if (a.sample_rate != b.sample_rate) throw ContractError("lsd: sample rates differ");
  const std::size_t n = std::min(a.size(), b.size());
  Waveform ta = a, tb = b;
  ta.samples.resize(n);
  tb.samples.resize(n);
  const auto sa = Stft(ta, options.stft);
  const auto sb = Stft(tb, options.stft);
  const double bin_hz = a.sample_rate / static_cast<double>(options.stft.fft_len);
  const double hi = options.max_hz > 0 ? options.max_hz : a.sample_rate / 2;
  std::size_t f_lo = static_cast<std::size_t>(std::ceil(options.min_hz / bin_hz));
  std::size_t f_hi = std::min(sa.bins - 1, static_cast<std::size_t>(std::floor(hi / bin_hz)));
  if (f_lo > f_hi) throw DomainError("lsd: empty frequency band");
  constexpr double kEps = 1e-10;
  double total = 0;
  for (std::size_t t = 0; t < sa.frames; ++t) {
    double acc = 0;
    for (std::size_t f = f_lo; f <= f_hi; ++f) {
      const double d = 20.0 * std::log10(std::abs(sa.at(t, f)) + kEps) -
                       20.0 * std::log10(std::abs(sb.at(t, f)) + kEps);
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(f_hi - f_lo + 1));
  }
  return total / static_cast<double>(sa.frames);
}

double SiSdr(std::span<const double> est, std::span<const double> ref) {
  const std::size_t n = std::min(est.size(), ref.size());
  double rr = 0, er = 0;
  for (std::size_t i = 0; i < n; ++i) {
    rr += ref[i] * ref[i];
    er += est[i] * ref[i];
  }
  if (rr == 0) throw ContractError("si_sdr: reference is all zeros");
  const double alpha = er / rr;
  double ss = 0, ee = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = alpha * ref[i];
    const double e = est[i] - s;
    ss += s * s;
    ee += e * e;
  }
  if (ee == 0) return kSiSdrCap;
  if (ss == 0) return -kSiSdrCap;
  return std::clamp(10.0 * std::log10(ss / ee), -kSiSdrCap, kSiSdrCap);
}

long BestLag(std::span<const double> est, std::span<const double> ref, long max_lag) {
  if (est.empty() || ref.empty()) return 0;
  // corr[k] = Σ est[n]·ref[n − lag] with k = lag + ref.size() − 1.
  std::vector<double> rev(ref.rbegin(), ref.rend());
  const auto corr = FullConvolution(est, rev);
  const long offset = static_cast<long>(ref.size()) - 1;
  long best = 0;
  double best_val = -1;
  for (long lag = -max_lag; lag <= max_lag; ++lag) {
    const long k = lag + offset;
    if (k < 0 || k >= static_cast<long>(corr.size())) continue;
    if (std::abs(corr[k]) > best_val) {
      best_val = std::abs(corr[k]);
      best = lag;
    }
  }
  return best;
}

double AlignedSiSdr(std::span<const double> est, std::span<const double> ref, long max_lag) {
  const long lag = BestLag(est, ref, max_lag);
  // est[n] lines up with ref[n − lag].
  if (lag >= 0) {
    const auto e = est.subspan(std::min<std::size_t>(lag, est.size()));
    return SiSdr(e, ref);
  }
  const auto r = ref.subspan(std::min<std::size_t>(-lag, ref.size()));
  return SiSdr(est, r);
}

AttentionScores ScoreAttention(std::span<const double> map, std::size_t s) {
  if (s == 0 || map.size() != s * s)
    throw DimensionError("attention map must be S×S, got " + std::to_string(map.size()) +
                         " entries for S = " + std::to_string(s));
  AttentionScores out;
  std::vector<double> col(s, 0.0);
  double diag = 0, entropy = 0;
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      const double p = map[i * s + j];
      col[j] += p;
      if ((i > j ? i - j : j - i) <= 2) diag += p;
      if (p > 0) entropy -= p * std::log(p);
    }
  }
  out.diagonality = diag / static_cast<double>(s);
  out.verticality = *std::max_element(col.begin(), col.end());
  out.globality = s == 1 ? 1.0 : entropy / static_cast<double>(s) / std::log(static_cast<double>(s));
  return out;
}

double MeasureRtf(const std::function<void()>& fn, double audio_duration, int runs) {
  if (!(audio_duration > 0)) throw DomainError("rtf: audio duration must be positive");
  if (runs < 1) throw DomainError("rtf: need at least one run");
  std::vector<double> times;
  for (int r = 0; r < runs; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    times.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2] / audio_duration;
}

}  // namespace dereverb
