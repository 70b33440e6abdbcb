// include/dereverb/fft.h

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

#ifndef DEREVERB_FFT_H_
#define DEREVERB_FFT_H_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dereverb {

using Complex = std::complex<double>;

// In-place iterative radix-2 FFT for a fixed power-of-two length.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }
  // X[k] = sum_n x[n] e^{-2πikn/N}
  void Forward(std::span<Complex> data) const;
  // x[n] = (1/N) sum_k X[k] e^{+2πikn/N}
  void Inverse(std::span<Complex> data) const;

 private:
  void Transform(std::span<Complex> data, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bit_reverse_;
  std::vector<Complex> twiddles_;  // e^{-2πik/N}, k < N/2
};

bool IsPowerOfTwo(std::size_t n);
std::size_t NextPowerOfTwo(std::size_t n);

}  // namespace dereverb

#endif  // DEREVERB_FFT_H_
