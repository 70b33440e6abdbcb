// src/dsp.cc

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

#include "dereverb/dsp.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "dereverb/errors.h"
#include "linalg.h"

namespace dereverb {

void Waveform::Validate() const {
  if (!(sample_rate > 0) || !std::isfinite(sample_rate)) {
    throw ContractError("waveform sample rate must be positive, got " +
                        std::to_string(sample_rate));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw ContractError("waveform sample " + std::to_string(i) + " is not finite");
    }
  }
}

void StftConfig::Validate() const {
  if (hop == 0 || hop > window_len || window_len > fft_len || window_len % hop != 0 ||
      !IsPowerOfTwo(fft_len)) {
    throw ConfigError("invalid STFT config: window " + std::to_string(window_len) +
                      ", fft " + std::to_string(fft_len) + ", hop " + std::to_string(hop));
  }
}

std::vector<double> HannWindow(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  return w;
}

std::size_t NumFrames(std::size_t num_samples, const StftConfig& cfg) {
  if (num_samples < cfg.window_len) return 0;
  return 1 + (num_samples - cfg.window_len) / cfg.hop;
}

ComplexSpectrogram Stft(const Waveform& w, const StftConfig& cfg) {
  cfg.Validate();
  if (w.size() < cfg.window_len) {
    throw ContractError("stft: signal of " + std::to_string(w.size()) +
                        " samples is shorter than the " + std::to_string(cfg.window_len) +
                        "-sample window");
  }
  const Fft fft(cfg.fft_len);
  const std::vector<double> window = HannWindow(cfg.window_len);
  ComplexSpectrogram s;
  s.frames = NumFrames(w.size(), cfg);
  s.bins = cfg.num_bins();
  s.config = cfg;
  s.sample_rate = w.sample_rate;
  s.data.resize(s.frames * s.bins);
  std::vector<Complex> buf(cfg.fft_len);
  for (std::size_t t = 0; t < s.frames; ++t) {
    std::fill(buf.begin(), buf.end(), Complex(0.0, 0.0));
    const double* x = w.samples.data() + t * cfg.hop;
    for (std::size_t i = 0; i < cfg.window_len; ++i) buf[i] = x[i] * window[i];
    fft.Forward(buf);
    std::copy_n(buf.begin(), s.bins, s.data.begin() + t * s.bins);
  }
  return s;
}

Waveform Istft(const ComplexSpectrogram& s) {
  const StftConfig& cfg = s.config;
  cfg.Validate();
  if (s.bins != cfg.num_bins()) {
    throw DimensionError("istft: spectrogram has " + std::to_string(s.bins) +
                         " bins, config implies " + std::to_string(cfg.num_bins()));
  }
  Waveform out;
  out.sample_rate = s.sample_rate;
  if (s.frames == 0) return out;
  const std::size_t n = cfg.fft_len;
  const std::size_t length = (s.frames - 1) * cfg.hop + cfg.window_len;
  const Fft fft(n);
  const std::vector<double> window = HannWindow(cfg.window_len);
  std::vector<double> num(length, 0.0), den(length, 0.0);
  std::vector<Complex> buf(n);
  for (std::size_t t = 0; t < s.frames; ++t) {
    const Complex* row = s.data.data() + t * s.bins;
    buf[0] = Complex(row[0].real(), 0.0);
    buf[n / 2] = Complex(row[n / 2].real(), 0.0);
    for (std::size_t k = 1; k < n / 2; ++k) {
      buf[k] = row[k];
      buf[n - k] = std::conj(row[k]);
    }
    fft.Inverse(buf);
    const std::size_t offset = t * cfg.hop;
    for (std::size_t i = 0; i < cfg.window_len; ++i) {
      num[offset + i] += window[i] * buf[i].real();
      den[offset + i] += window[i] * window[i];
    }
  }
  // Near the ends only one tapered frame contributes and den -> 0; a
  // floor keeps inconsistent spectrograms (WPE, Griffin-Lim) from blowing
  // up there. Consistent input is unaffected where den exceeds the floor.
  const double peak = *std::max_element(den.begin(), den.end());
  const double floor = 1e-3 * peak;
  out.samples.resize(length);
  for (std::size_t i = 0; i < length; ++i)
    out.samples[i] = den[i] > 1e-12 ? num[i] / std::max(den[i], floor) : 0.0;
  return out;
}

MagnitudeSpectrogram Magnitude(const ComplexSpectrogram& s) {
  MagnitudeSpectrogram m{s.frames, s.bins, std::vector<double>(s.data.size())};
  for (std::size_t i = 0; i < s.data.size(); ++i) m.data[i] = std::abs(s.data[i]);
  return m;
}

// ---------------------------------------------------------------------------
// Mel analysis

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank BuildMelFilterbank(std::size_t num_mels, std::size_t num_bins,
                                 double sample_rate, double f_min, double f_max) {
  if (!(f_min >= 0) || !(f_min < f_max) || !(f_max <= sample_rate / 2)) {
    throw DomainError("mel filterbank needs 0 <= f_min < f_max <= sr/2, got f_min=" +
                      std::to_string(f_min) + " f_max=" + std::to_string(f_max) +
                      " sr=" + std::to_string(sample_rate));
  }
  if (num_mels == 0 || num_bins < 2) {
    throw DomainError("mel filterbank needs at least one filter and two bins");
  }
  MelFilterbank fb;
  fb.num_mels = num_mels;
  fb.num_bins = num_bins;
  fb.sample_rate = sample_rate;
  fb.f_min = f_min;
  fb.f_max = f_max;
  fb.weights.assign(num_mels * num_bins, 0.0);
  fb.peaks_hz.resize(num_mels);

  const double mel_lo = HzToMel(f_min), mel_hi = HzToMel(f_max);
  std::vector<double> edges(num_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                    static_cast<double>(num_mels + 1));
  const double fft_len = 2.0 * static_cast<double>(num_bins - 1);
  for (std::size_t m = 0; m < num_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    fb.peaks_hz[m] = center;
    double row_sum = 0;
    for (std::size_t f = 0; f < num_bins; ++f) {
      const double hz = static_cast<double>(f) * sample_rate / fft_len;
      const double rise = (hz - lo) / (center - lo);
      const double fall = (hi - hz) / (hi - center);
      const double v = std::max(0.0, std::min(rise, fall));
      fb.weights[m * num_bins + f] = v;
      row_sum += v;
    }
    if (!(row_sum > 0)) {
      throw DomainError("mel filter " + std::to_string(m) +
                        " covers no FFT bin; use a longer FFT or fewer filters");
    }
  }

  // pinv(C) = Cᵀ(CCᵀ)⁻¹ for the full-row-rank M×F matrix C.
  std::vector<double> gram(num_mels * num_mels, 0.0);
  for (std::size_t i = 0; i < num_mels; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0;
      for (std::size_t f = 0; f < num_bins; ++f)
        s += fb.weights[i * num_bins + f] * fb.weights[j * num_bins + f];
      gram[i * num_mels + j] = gram[j * num_mels + i] = s;
    }
  if (!internal::CholeskyFactor(gram, num_mels)) {
    throw NumericError("mel filterbank is rank deficient; cannot form its pseudo-inverse");
  }
  fb.pseudo_inverse.assign(num_bins * num_mels, 0.0);
  std::vector<double> column(num_mels);
  for (std::size_t f = 0; f < num_bins; ++f) {
    for (std::size_t m = 0; m < num_mels; ++m) column[m] = fb.weights[m * num_bins + f];
    internal::CholeskySolve<double>(gram, num_mels, column);
    std::copy(column.begin(), column.end(), fb.pseudo_inverse.begin() + f * num_mels);
  }
  return fb;
}

LogMelSpectrogram ToLogMel(const MagnitudeSpectrogram& mag, const MelFilterbank& fb,
                           double floor) {
  if (mag.bins != fb.num_bins) {
    throw DimensionError("to_log_mel: spectrogram has " + std::to_string(mag.bins) +
                         " bins, filterbank expects " + std::to_string(fb.num_bins));
  }
  LogMelSpectrogram out;
  out.frames = mag.frames;
  out.bins = fb.num_mels;
  out.data.resize(out.frames * out.bins);
  for (std::size_t t = 0; t < mag.frames; ++t) {
    const double* row = mag.data.data() + t * mag.bins;
    for (std::size_t m = 0; m < fb.num_mels; ++m) {
      const double* w = fb.weights.data() + m * fb.num_bins;
      double e = 0;
      for (std::size_t f = 0; f < fb.num_bins; ++f) e += w[f] * row[f];
      out.data[t * out.bins + m] = std::log(std::max(e, floor));
    }
  }
  return out;
}

LogMelSpectrogram ToLogMel(const ComplexSpectrogram& s, const MelFilterbank& fb,
                           double floor) {
  return ToLogMel(Magnitude(s), fb, floor);
}

NormStats FitNormStats(std::span<const LogMelSpectrogram> corpus) {
  if (corpus.empty()) throw ContractError("fit_norm_stats: empty corpus");
  const std::size_t bins = corpus[0].bins;
  std::size_t count = 0;
  NormStats stats{std::vector<double>(bins, 0.0), std::vector<double>(bins, 0.0)};
  for (const auto& m : corpus) {
    if (m.bins != bins) throw DimensionError("fit_norm_stats: inconsistent bin counts");
    if (m.normalized) throw ContractError("fit_norm_stats: input already normalized");
    for (std::size_t t = 0; t < m.frames; ++t)
      for (std::size_t b = 0; b < bins; ++b) stats.mean[b] += m.at(t, b);
    count += m.frames;
  }
  if (count == 0) throw ContractError("fit_norm_stats: corpus has no frames");
  for (double& v : stats.mean) v /= static_cast<double>(count);
  for (const auto& m : corpus)
    for (std::size_t t = 0; t < m.frames; ++t)
      for (std::size_t b = 0; b < bins; ++b) {
        const double d = m.at(t, b) - stats.mean[b];
        stats.stddev[b] += d * d;
      }
  for (double& v : stats.stddev)
    v = std::max(std::sqrt(v / static_cast<double>(count)), kMinStddev);
  return stats;
}

namespace {
void CheckStats(const LogMelSpectrogram& m, const NormStats& stats) {
  if (stats.mean.size() != m.bins || stats.stddev.size() != m.bins) {
    throw DimensionError("normalization stats have " + std::to_string(stats.mean.size()) +
                         " bins, features have " + std::to_string(m.bins));
  }
}
}  // namespace

LogMelSpectrogram Normalize(const LogMelSpectrogram& m, const NormStats& stats) {
  if (m.normalized) throw ContractError("normalize: features already normalized");
  CheckStats(m, stats);
  LogMelSpectrogram out = m;
  for (std::size_t t = 0; t < m.frames; ++t)
    for (std::size_t b = 0; b < m.bins; ++b)
      out.at(t, b) = (m.at(t, b) - stats.mean[b]) / std::max(stats.stddev[b], kMinStddev);
  out.normalized = true;
  out.stats = stats;
  return out;
}

LogMelSpectrogram Denormalize(const LogMelSpectrogram& m, const NormStats& stats) {
  CheckStats(m, stats);
  LogMelSpectrogram out = m;
  for (std::size_t t = 0; t < m.frames; ++t)
    for (std::size_t b = 0; b < m.bins; ++b)
      out.at(t, b) = m.at(t, b) * std::max(stats.stddev[b], kMinStddev) + stats.mean[b];
  out.normalized = false;
  out.stats.reset();
  return out;
}

LogMelSpectrogram Denormalize(const LogMelSpectrogram& m) {
  if (!m.normalized || !m.stats) {
    throw ContractError("denormalize: features carry no normalization stats");
  }
  return Denormalize(m, *m.stats);
}

MagnitudeSpectrogram MelToLinear(const LogMelSpectrogram& m, const MelFilterbank& fb) {
  if (m.normalized) throw ContractError("mel_to_linear: features must be denormalized");
  if (m.bins != fb.num_mels) {
    throw DimensionError("mel_to_linear: features have " + std::to_string(m.bins) +
                         " bins, filterbank has " + std::to_string(fb.num_mels));
  }
  MagnitudeSpectrogram out{m.frames, fb.num_bins,
                           std::vector<double>(m.frames * fb.num_bins, 0.0)};
  std::vector<double> energy(fb.num_mels);
  for (std::size_t t = 0; t < m.frames; ++t) {
    for (std::size_t k = 0; k < fb.num_mels; ++k) energy[k] = std::exp(m.at(t, k));
    for (std::size_t f = 0; f < fb.num_bins; ++f) {
      const double* p = fb.pseudo_inverse.data() + f * fb.num_mels;
      double v = 0;
      for (std::size_t k = 0; k < fb.num_mels; ++k) v += p[k] * energy[k];
      out.at(t, f) = std::max(0.0, v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Griffin-Lim

GriffinLimResult GriffinLim(const MagnitudeSpectrogram& mag, const StftConfig& cfg,
                            double sample_rate, std::size_t iters) {
  cfg.Validate();
  if (iters == 0) throw ContractError("griffin_lim: need at least one iteration");
  if (mag.bins != cfg.num_bins() || mag.frames == 0) {
    throw DimensionError("griffin_lim: magnitudes are " + std::to_string(mag.frames) + "x" +
                         std::to_string(mag.bins) + ", config expects " +
                         std::to_string(cfg.num_bins()) + " bins");
  }
  double mag_norm = 0;
  for (double v : mag.data) mag_norm += v * v;
  mag_norm = std::sqrt(mag_norm);

  ComplexSpectrogram estimate;
  estimate.frames = mag.frames;
  estimate.bins = mag.bins;
  estimate.config = cfg;
  estimate.sample_rate = sample_rate;
  estimate.data.resize(mag.data.size());
  for (std::size_t i = 0; i < mag.data.size(); ++i) estimate.data[i] = Complex(mag.data[i], 0.0);

  GriffinLimResult result;
  for (std::size_t it = 0; it < iters; ++it) {
    result.waveform = Istft(estimate);
    const ComplexSpectrogram rebuilt = Stft(result.waveform, cfg);
    double err = 0;
    for (std::size_t i = 0; i < mag.data.size(); ++i) {
      const double a = std::abs(rebuilt.data[i]);
      err += (a - mag.data[i]) * (a - mag.data[i]);
      estimate.data[i] = a > 0 ? rebuilt.data[i] * (mag.data[i] / a) : Complex(mag.data[i], 0.0);
    }
    result.spectral_convergence.push_back(mag_norm > 0 ? std::sqrt(err) / mag_norm : 0.0);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

constexpr double kZeroCrossings = 32.0;
constexpr double kKaiserBeta = 8.0;
constexpr double kCutoffMargin = 0.97;

double Sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

long IntegerRate(double rate, const char* what) {
  const double r = std::round(rate);
  if (!(rate > 0) || std::abs(rate - r) > 1e-9) {
    throw ContractError(std::string("resample: ") + what +
                        " sample rate must be a positive integer, got " +
                        std::to_string(rate));
  }
  return static_cast<long>(r);
}

}  // namespace

Waveform Resample(const Waveform& w, double target_rate) {
  const long src = IntegerRate(w.sample_rate, "source");
  const long dst = IntegerRate(target_rate, "target");
  if (src == dst) return w;
  const long g = std::gcd(src, dst);
  const long up = dst / g, down = src / g;

  const double fc = kCutoffMargin * std::min(1.0, static_cast<double>(up) / down);
  const double half_width = kZeroCrossings / fc;
  const long taps_each_side = static_cast<long>(std::ceil(half_width));
  const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);

  // One filter per output phase; phase p sits p/up input samples after the
  // integer position.
  std::vector<std::vector<double>> phases(up);
  for (long p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    auto& taps = phases[p];
    taps.resize(2 * taps_each_side + 1);
    double sum = 0;
    for (long j = -taps_each_side; j <= taps_each_side; ++j) {
      const double t = frac - static_cast<double>(j);
      double v = 0;
      if (std::abs(t) < half_width) {
        const double r = t / half_width;
        const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1 - r * r)) / i0_beta;
        v = fc * Sinc(fc * t) * window;
      }
      taps[j + taps_each_side] = v;
      sum += v;
    }
    for (double& v : taps) v /= sum;
  }

  Waveform out;
  out.sample_rate = static_cast<double>(dst);
  if (w.samples.empty()) return out;
  const long n_in = static_cast<long>(w.size());
  const long n_out = (n_in - 1) * up / down + 1;
  out.samples.resize(n_out);
  for (long n = 0; n < n_out; ++n) {
    const long num = n * down;
    const long base = num / up;
    const auto& taps = phases[num % up];
    double acc = 0;
    const long lo = std::max(-taps_each_side, -base);
    const long hi = std::min(taps_each_side, n_in - 1 - base);
    for (long j = lo; j <= hi; ++j) acc += taps[j + taps_each_side] * w.samples[base + j];
    out.samples[n] = acc;
  }
  return out;
}

}  // namespace dereverb
