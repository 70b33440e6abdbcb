// include/dereverb/metrics.h

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

#ifndef DEREVERB_METRICS_H_
#define DEREVERB_METRICS_H_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dereverb/dsp.h"

namespace dereverb {

struct LsdOptions {
  StftConfig stft;
  // Bins outside [min_hz, max_hz] are ignored; max_hz <= 0 means Nyquist.
  double min_hz = 0.0;
  double max_hz = 0.0;
};

// Mean over frames of the RMS (over bins) difference of 20·log10(|X| + 1e-10)
// between the two spectrograms. Inputs are trimmed to the shorter length.
double LogSpectralDistance(const Waveform& a, const Waveform& b, const LsdOptions& options = {});

inline constexpr double kSiSdrCap = 60.0;

// 10·log10(‖s‖² / ‖e‖²) with s the projection of est onto ref, capped at
// kSiSdrCap. Lengths are trimmed to the shorter one. Throws ContractError
// for an all-zero reference.
double SiSdr(std::span<const double> est, std::span<const double> ref);

// Lag in [−max_lag, max_lag] maximizing |Σ est[n]·ref[n − lag]|.
long BestLag(std::span<const double> est, std::span<const double> ref, long max_lag);

// SI-SDR after shifting est by BestLag.
double AlignedSiSdr(std::span<const double> est, std::span<const double> ref,
                    long max_lag = 2400);

struct AttentionScores {
  double diagonality = 0;  // mean mass within |i − j| <= 2, in [0, 1]
  double verticality = 0;  // largest column sum, in [1, S]
  double globality = 0;    // mean row entropy / log S, in [0, 1]
};

// `map` is a row-major S×S row-stochastic matrix.
AttentionScores ScoreAttention(std::span<const double> map, std::size_t s);

// Median over `runs` timed calls of fn, divided by audio_duration seconds.
double MeasureRtf(const std::function<void()>& fn, double audio_duration, int runs = 5);

}  // namespace dereverb

#endif  // DEREVERB_METRICS_H_
