// include/dereverb/wpe.h

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

#ifndef DEREVERB_WPE_H_
#define DEREVERB_WPE_H_

#include <cstddef>
#include <vector>

#include "dereverb/dsp.h"

namespace dereverb {

struct WpeConfig {
  std::size_t taps = 10;
  std::size_t delay = 3;  // frames
  std::size_t iterations = 3;
  double eps = 1e-10;

  void Validate() const;
};

// Single-channel weighted prediction error. Every frequency bin is treated
// independently: with λ(t) = max(|X̂(t)|², eps) and the delayed history
// ỹ(t) = [Y(t−D), …, Y(t−D−K+1)] (zeros before the first frame), solve
//   (Σ ỹỹᴴ/λ + eps·I) g = Σ ỹ Y*/λ
// and set X̂(t) = Y(t) − gᴴỹ(t). Repeated `iterations` times from X̂ = Y.
// Y is first divided by its RMS over all cells (and the result multiplied
// back), which makes eps scale-free.
// Throws ContractError unless frames > taps + delay.
ComplexSpectrogram WpeDereverb(const ComplexSpectrogram& y, const WpeConfig& cfg);

// STFT → WPE → ISTFT, cut or zero-padded back to the input length.
Waveform WpeDereverb(const Waveform& y, const WpeConfig& cfg, const StftConfig& stft = {});

// Solves the row-major k×k Hermitian positive definite system R g = r by
// Cholesky. Throws NumericError on non-finite input or a failed factor.
std::vector<Complex> SolveHermitian(std::vector<Complex> r_matrix, std::vector<Complex> r,
                                    std::size_t k);

}  // namespace dereverb

#endif  // DEREVERB_WPE_H_
