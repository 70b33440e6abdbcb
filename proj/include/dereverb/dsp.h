// include/dereverb/dsp.h

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

#ifndef DEREVERB_DSP_H_
#define DEREVERB_DSP_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dereverb/fft.h"

namespace dereverb {

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 24000.0;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  // Throws ContractError for a non-positive rate or non-finite samples.
  void Validate() const;
};

// Analysis settings of the log-Mel front end. Defaults follow the 24 kHz
// recipe: 1200-sample Hann window, 2048-point FFT, 300-sample hop.
struct StftConfig {
  std::size_t window_len = 1200;
  std::size_t fft_len = 2048;
  std::size_t hop = 300;

  std::size_t num_bins() const { return fft_len / 2 + 1; }
  // hop <= window_len <= fft_len, window_len % hop == 0, fft_len a power of 2.
  void Validate() const;
  bool operator==(const StftConfig&) const = default;
};

// Periodic Hann window of length n.
std::vector<double> HannWindow(std::size_t n);

// Row-major T×F matrix of one-sided STFT coefficients.
struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<Complex> data;
  StftConfig config;
  double sample_rate = 24000.0;

  Complex& at(std::size_t t, std::size_t f) { return data[t * bins + f]; }
  const Complex& at(std::size_t t, std::size_t f) const { return data[t * bins + f]; }
};

// Row-major T×F non-negative magnitudes.
struct MagnitudeSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> data;

  double& at(std::size_t t, std::size_t f) { return data[t * bins + f]; }
  double at(std::size_t t, std::size_t f) const { return data[t * bins + f]; }
};

// Number of full frames for a signal of the given length (0 when shorter
// than one window).
std::size_t NumFrames(std::size_t num_samples, const StftConfig& cfg);

// Frame t covers samples [t·hop, t·hop + window_len), Hann-windowed and
// zero-padded to fft_len. Throws ContractError when the signal is shorter
// than one window.
ComplexSpectrogram Stft(const Waveform& w, const StftConfig& cfg);

// Least-squares weighted overlap-add inverse. The output has
// (frames - 1)·hop + window_len samples.
Waveform Istft(const ComplexSpectrogram& s);

MagnitudeSpectrogram Magnitude(const ComplexSpectrogram& s);

// HTK mel scale.
double HzToMel(double hz);
double MelToHz(double mel);

// Triangular filters with peaks equally spaced on the mel scale.
struct MelFilterbank {
  std::size_t num_mels = 0;
  std::size_t num_bins = 0;
  double sample_rate = 0;
  double f_min = 0;
  double f_max = 0;
  std::vector<double> weights;         // M×F
  std::vector<double> pseudo_inverse;  // F×M, Moore–Penrose inverse of weights
  std::vector<double> peaks_hz;        // M

  double weight(std::size_t m, std::size_t f) const { return weights[m * num_bins + f]; }
};

// Throws DomainError unless 0 <= f_min < f_max <= sample_rate / 2.
MelFilterbank BuildMelFilterbank(std::size_t num_mels = 80, std::size_t num_bins = 1025,
                                 double sample_rate = 24000.0, double f_min = 80.0,
                                 double f_max = 7600.0);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// Row-major T×M log-Mel features.
struct LogMelSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> data;
  bool normalized = false;
  std::optional<NormStats> stats;

  double& at(std::size_t t, std::size_t m) { return data[t * bins + m]; }
  double at(std::size_t t, std::size_t m) const { return data[t * bins + m]; }
};

inline constexpr double kLogMelFloor = 1e-10;
inline constexpr double kMinStddev = 1e-8;

// frames = ln(max(C·|X|ᵀ, floor))ᵀ
LogMelSpectrogram ToLogMel(const ComplexSpectrogram& s, const MelFilterbank& fb,
                           double floor = kLogMelFloor);
LogMelSpectrogram ToLogMel(const MagnitudeSpectrogram& mag, const MelFilterbank& fb,
                           double floor = kLogMelFloor);

// Per-bin mean and population standard deviation over every frame of the
// corpus; standard deviations below kMinStddev are clamped.
NormStats FitNormStats(std::span<const LogMelSpectrogram> corpus);
LogMelSpectrogram Normalize(const LogMelSpectrogram& m, const NormStats& stats);
// Inverts Normalize using the statistics recorded in `m`.
LogMelSpectrogram Denormalize(const LogMelSpectrogram& m);
LogMelSpectrogram Denormalize(const LogMelSpectrogram& m, const NormStats& stats);

// max(0, pinv(C)·exp(frame)) for every frame of a denormalized spectrogram.
MagnitudeSpectrogram MelToLinear(const LogMelSpectrogram& m, const MelFilterbank& fb);

struct GriffinLimResult {
  Waveform waveform;
  // ‖|STFT(w_i)| − mag‖_F / ‖mag‖_F after every iteration i.
  std::vector<double> spectral_convergence;
};

// Zero initial phase; each iteration inverts the current estimate and
// re-imposes the target magnitudes on the resulting STFT phase.
GriffinLimResult GriffinLim(const MagnitudeSpectrogram& mag, const StftConfig& cfg,
                            double sample_rate, std::size_t iters = 32);

// Windowed-sinc polyphase resampling between integer sample rates.
Waveform Resample(const Waveform& w, double target_rate);

}  // namespace dereverb

#endif  // DEREVERB_DSP_H_
