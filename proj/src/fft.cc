// src/fft.cc

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

#include "dereverb/fft.h"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "dereverb/errors.h"

namespace dereverb {

bool IsPowerOfTwo(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t NextPowerOfTwo(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

Fft::Fft(std::size_t n) : n_(n), bit_reverse_(n), twiddles_(n / 2) {
  if (!IsPowerOfTwo(n)) {
    throw DomainError("FFT length must be a power of two, got " + std::to_string(n));
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b)
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    bit_reverse_[i] = r;
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n);
    twiddles_[k] = Complex(std::cos(angle), std::sin(angle));
  }
}

void Fft::Forward(std::span<Complex> data) const { Transform(data, false); }

void Fft::Inverse(std::span<Complex> data) const {
  Transform(data, true);
  const double scale = 1.0 / static_cast<double>(n_);
  for (Complex& v : data) v *= scale;
}

void Fft::Transform(std::span<Complex> data, bool inverse) const {
  if (data.size() != n_) {
    throw DimensionError("FFT of length " + std::to_string(n_) + " given " +
                         std::to_string(data.size()) + " samples");
  }
  for (std::size_t i = 0; i < n_; ++i)
    if (i < bit_reverse_[i]) std::swap(data[i], data[bit_reverse_[i]]);
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        Complex w = twiddles_[j * step];
        if (inverse) w = std::conj(w);
        const Complex u = data[start + j];
        const Complex b = data[start + j + half];
        const Complex v(b.real() * w.real() - b.imag() * w.imag(),
                        b.real() * w.imag() + b.imag() * w.real());
        data[start + j] = u + v;
        data[start + j + half] = u - v;
      }
    }
  }
}

}  // namespace dereverb
