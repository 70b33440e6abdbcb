// src/wpe.cc

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

#include "dereverb/wpe.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "dereverb/errors.h"
#include "linalg.h"

namespace dereverb {

void WpeConfig::Validate() const {
  if (taps < 1 || delay < 1 || iterations < 1)
    throw ConfigError("wpe: taps, delay and iterations must all be >= 1");
  if (!(eps > 0)) throw ConfigError("wpe: eps must be positive");
}

std::vector<Complex> SolveHermitian(std::vector<Complex> r_matrix, std::vector<Complex> r,
                                    std::size_t k) {
  if (r_matrix.size() != k * k || r.size() != k)
    throw DimensionError("solve_hermitian: expected a " + std::to_string(k) + "x" +
                         std::to_string(k) + " system");
  for (const Complex& v : r_matrix)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw NumericError("solve_hermitian: non-finite matrix entry");
  for (const Complex& v : r)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw NumericError("solve_hermitian: non-finite right-hand side");
  if (!internal::CholeskyFactor(r_matrix, k))
    throw NumericError("solve_hermitian: matrix is not positive definite");
  internal::CholeskySolve(r_matrix, k, std::span<Complex>(r));
  return r;
}

ComplexSpectrogram WpeDereverb(const ComplexSpectrogram& y, const WpeConfig& cfg) {
  cfg.Validate();
  const std::size_t frames = y.frames, bins = y.bins, k = cfg.taps, d = cfg.delay;
  if (frames <= k + d) {
    throw ContractError("wpe: need more than taps + delay = " + std::to_string(k + d) +
                        " frames, got " + std::to_string(frames));
  }
  // Work at unit mean power so eps has the same meaning at any input level.
  double power = 0;
  for (const Complex& v : y.data) power += std::norm(v);
  power /= static_cast<double>(y.data.size());
  ComplexSpectrogram x = y;
  if (power == 0) return x;
  const double scale = std::sqrt(power);
  std::vector<Complex> yb(frames), xb(frames), hist(frames * k), rm(k * k), rv(k);
  std::vector<double> inv_lambda(frames);
  for (std::size_t f = 0; f < bins; ++f) {
    for (std::size_t t = 0; t < frames; ++t) yb[t] = y.at(t, f) / scale;
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t lag = d + j;
        hist[t * k + j] = t >= lag ? yb[t - lag] : Complex(0.0);
      }
    }
    xb = yb;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      for (std::size_t t = 0; t < frames; ++t)
        inv_lambda[t] = 1.0 / std::max(std::norm(xb[t]), cfg.eps);
      std::fill(rm.begin(), rm.end(), Complex(0.0));
      std::fill(rv.begin(), rv.end(), Complex(0.0));
      for (std::size_t t = 0; t < frames; ++t) {
        const Complex* h = &hist[t * k];
        const double w = inv_lambda[t];
        for (std::size_t a = 0; a < k; ++a) {
          const Complex ha = h[a] * w;
          for (std::size_t b = 0; b <= a; ++b) rm[a * k + b] += ha * std::conj(h[b]);
          rv[a] += ha * std::conj(yb[t]);
        }
      }
      for (std::size_t a = 0; a < k; ++a) {
        rm[a * k + a] += cfg.eps;
        for (std::size_t b = a + 1; b < k; ++b) rm[a * k + b] = std::conj(rm[b * k + a]);
      }
      std::vector<Complex> g;
      try {
        g = SolveHermitian(rm, rv, k);
      } catch (const NumericError& e) {
        throw NumericError("wpe: bin " + std::to_string(f) + ": " + e.what());
      }
      for (std::size_t t = 0; t < frames; ++t) {
        Complex pred = 0;
        for (std::size_t a = 0; a < k; ++a) pred += std::conj(g[a]) * hist[t * k + a];
        xb[t] = yb[t] - pred;
      }
    }
    for (std::size_t t = 0; t < frames; ++t) x.at(t, f) = xb[t] * scale;
  }
  return x;
}

Waveform WpeDereverb(const Waveform& y, const WpeConfig& cfg, const StftConfig& stft) {
  Waveform out = Istft(WpeDereverb(Stft(y, stft), cfg));
  out.sample_rate = y.sample_rate;
  out.samples.resize(y.size(), 0.0);
  return out;
}

}  // namespace dereverb
