// src/speech_synth.cc

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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dereverb/errors.h"
#include "dereverb/room_sim.h"

namespace dereverb {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kControlBlock = 48;

struct Formant {
  double start_hz;
  double end_hz;
  double bandwidth_hz;
  double gain;
};

// Rough vowel space: F1 250..850 Hz, F2 800..2400 Hz, F3 2300..3200 Hz.
std::vector<Formant> DrawFormants(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto lerp = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  return {
      {lerp(250, 850), lerp(250, 850), lerp(60, 120), 1.0},
      {lerp(800, 2400), lerp(800, 2400), lerp(80, 160), lerp(0.4, 0.8)},
      {lerp(2300, 3200), lerp(2300, 3200), lerp(120, 250), lerp(0.15, 0.4)},
      {lerp(3300, 4500), lerp(3300, 4500), lerp(200, 400), lerp(0.05, 0.15)},
  };
}

double Envelope(double t, double len, double attack, double release) {
  if (t < 0 || t > len) return 0.0;
  if (t < attack) return 0.5 - 0.5 * std::cos(std::numbers::pi * t / attack);
  if (t > len - release) return 0.5 - 0.5 * std::cos(std::numbers::pi * (len - t) / release);
  return 1.0;
}

void AddVoiced(std::vector<double>& out, std::size_t begin, std::size_t len, double fs,
               double max_hz, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double f0_start = 90.0 + 150.0 * u(rng);
  const double f0_slope = (u(rng) - 0.5) * 0.6 * f0_start;  // Hz per second
  const double vib_depth = 0.1 * u(rng);
  const double vib_rate = 1.0 + 4.0 * u(rng);
  const double vib_phase = kTwoPi * u(rng);
  const auto formants = DrawFormants(rng);
  const double seconds = len / fs;
  const double breath = 0.02 + 0.04 * u(rng);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t max_harmonics = static_cast<std::size_t>(max_hz / 80.0) + 1;
  std::vector<double> amp(max_harmonics);
  std::vector<double> harmonic_phase(max_harmonics);
  for (double& p : harmonic_phase) p = kTwoPi * u(rng);
  double phase = 0;
  for (std::size_t blk = 0; blk < len; blk += kControlBlock) {
    const double t_blk = blk / fs;
    const double f0 = std::max(60.0, f0_start + f0_slope * t_blk) *
                      (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * t_blk + vib_phase));
    const double x = t_blk / seconds;
    for (std::size_t h = 0; h < max_harmonics; ++h) {
      const double fh = (h + 1) * f0;
      if (fh >= max_hz) {
        amp[h] = 0;
        continue;
      }
      double a = 0;
      for (const auto& f : formants) {
        const double center = f.start_hz + (f.end_hz - f.start_hz) * x;
        const double r = (fh - center) / f.bandwidth_hz;
        a += f.gain / (1.0 + r * r);
      }
      // Source tilt, about −6 dB per octave.
      amp[h] = (a + 0.01) * 150.0 / (150.0 + fh);
    }
    const std::size_t end = std::min(len, blk + kControlBlock);
    for (std::size_t i = blk; i < end; ++i) {
      const double t = i / fs;
      const double env = Envelope(t, seconds, 0.02, 0.04);
      double s = 0;
      for (std::size_t h = 0; h < max_harmonics; ++h) {
        if (amp[h] == 0) continue;
        s += amp[h] * std::sin((h + 1) * phase + harmonic_phase[h]);
      }
      out[begin + i] += env * (s + breath * noise(rng));
      phase += kTwoPi * f0 / fs;
      if (phase > kTwoPi * 1e6) phase = std::fmod(phase, kTwoPi);
    }
  }
}

// Band-limited noise burst, a random-phase sum of sinusoids on a 25 Hz grid.
void AddFricative(std::vector<double>& out, std::size_t begin, std::size_t len, double fs,
                  double max_hz, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double lo = 2000.0 + 2000.0 * u(rng);
  const double hi = std::min(max_hz, lo + 1500.0 + 2500.0 * u(rng));
  const double level = 0.2 + 0.3 * u(rng);
  const double seconds = len / fs;
  std::vector<std::pair<double, double>> comps;
  for (double f = lo; f < hi; f += 25.0) comps.emplace_back(kTwoPi * f / fs, kTwoPi * u(rng));
  const double norm = level / std::sqrt(static_cast<double>(comps.size()));
  for (std::size_t i = 0; i < len; ++i) {
    double s = 0;
    for (const auto& [w, p] : comps) s += std::sin(w * i + p);
    out[begin + i] += Envelope(i / fs, seconds, 0.015, 0.03) * norm * s;
  }
}

}  // namespace

Waveform GenerateSpeechLike(const SpeechLikeOptions& options, std::uint64_t seed) {
  if (!(options.duration > 0) || !(options.sample_rate > 0))
    throw DomainError("speech generator needs positive duration and sample rate");
  if (!(options.max_harmonic_hz > 0 && options.max_harmonic_hz < options.sample_rate / 2))
    throw DomainError("max harmonic frequency must lie below Nyquist");
  const double fs = options.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(options.duration * fs));
  std::vector<double> out(n, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  double t = 0.05 + 0.1 * u(rng);
  const double stop = options.duration - 0.1;
  while (t < stop) {
    const bool fricative = u(rng) < 0.2;
    const double len = fricative ? 0.06 + 0.08 * u(rng) : 0.12 + 0.23 * u(rng);
    const double clipped = std::min(len, stop - t);
    if (clipped < 0.05) break;
    const auto begin = static_cast<std::size_t>(t * fs);
    const auto count = std::min(n - begin, static_cast<std::size_t>(clipped * fs));
    if (fricative) {
      AddFricative(out, begin, count, fs, options.max_harmonic_hz, rng);
    } else {
      AddVoiced(out, begin, count, fs, options.max_harmonic_hz, rng);
    }
    // Short within-word gaps, occasionally a longer pause.
    t += clipped + (u(rng) < 0.25 ? 0.15 + 0.2 * u(rng) : 0.03 + 0.07 * u(rng));
  }

  double peak = 0;
  for (double s : out) peak = std::max(peak, std::abs(s));
  const double scale = peak > 0 ? options.peak / peak : 0.0;
  std::normal_distribution<double> floor_noise(0.0, options.noise_floor_rms);
  for (double& s : out) s = s * scale + (options.noise_floor_rms > 0 ? floor_noise(rng) : 0.0);

  Waveform w;
  w.samples = std::move(out);
  w.sample_rate = fs;
  return w;
}

}  // namespace dereverb
