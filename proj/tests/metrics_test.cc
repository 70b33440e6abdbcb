// tests/metrics_test.cc

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dereverb/errors.h"
#include "dereverb/metrics.h"
#include "test_util.h"

namespace dereverb {
namespace {

using testing::RandomVector;

Waveform Wave(std::vector<double> s) {
  Waveform w;
  w.samples = std::move(s);
  return w;
}

TEST_CASE("log spectral distance") {
  const auto a = Wave(RandomVector(6000, 1));
  const auto b = Wave(RandomVector(6000, 2));
  CHECK(LogSpectralDistance(a, a) == 0.0);
  CHECK(LogSpectralDistance(a, b) == doctest::Approx(LogSpectralDistance(b, a)).epsilon(1e-12));

  auto doubled = a;
  for (double& v : doubled.samples) v *= 2;
  CHECK(LogSpectralDistance(a, doubled) == doctest::Approx(20 * std::log10(2.0)).epsilon(1e-6));
  CHECK(20 * std::log10(2.0) == doctest::Approx(6.0206).epsilon(1e-5));

  auto longer = b;
  longer.samples.resize(7000, 0.5);
  CHECK(LogSpectralDistance(a, longer) == doctest::Approx(LogSpectralDistance(a, b)));

  LsdOptions band;
  band.min_hz = 80;
  band.max_hz = 7600;
  CHECK(LogSpectralDistance(a, doubled, band) ==
        doctest::Approx(20 * std::log10(2.0)).epsilon(1e-6));
  band.min_hz = 9000;
  band.max_hz = 8000;
  CHECK_THROWS_AS(LogSpectralDistance(a, b, band), DomainError);
}

TEST_CASE("si-sdr") {
  const auto ref = RandomVector(5000, 3);
  CHECK(SiSdr(ref, ref) == kSiSdrCap);
  std::vector<double> scaled(ref);
  for (double& v : scaled) v *= -3.7;
  CHECK(SiSdr(scaled, ref) == kSiSdrCap);

  // Noise orthogonal to ref carrying 10% of its energy -> 10 dB.
  auto noise = RandomVector(5000, 4);
  double rr = 0, nr = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    rr += ref[i] * ref[i];
    nr += noise[i] * ref[i];
  }
  double nn = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    noise[i] -= nr / rr * ref[i];
    nn += noise[i] * noise[i];
  }
  std::vector<double> est(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) est[i] = ref[i] + std::sqrt(0.1 * rr / nn) * noise[i];
  CHECK(std::abs(SiSdr(est, ref) - 10.0) < 0.1);
  for (double& v : est) v *= -2.0;
  CHECK(std::abs(SiSdr(est, ref) - 10.0) < 0.1);

  CHECK_THROWS_AS(SiSdr(ref, std::vector<double>(5000, 0.0)), ContractError);
}

TEST_CASE("lag search") {
  const auto ref = RandomVector(4000, 5);
  std::vector<double> delayed(4000, 0.0);
  for (std::size_t i = 70; i < delayed.size(); ++i) delayed[i] = 0.5 * ref[i - 70];
  CHECK(BestLag(delayed, ref, 2400) == 70);
  CHECK(BestLag(ref, delayed, 2400) == -70);
  CHECK(AlignedSiSdr(delayed, ref) == kSiSdrCap);
  CHECK(SiSdr(delayed, ref) < 0);
}

TEST_CASE("attention scores") {
  const std::size_t s = 9;
  std::vector<double> eye(s * s, 0.0), uniform(s * s, 1.0 / s), column(s * s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    eye[i * s + i] = 1.0;
    column[i * s + 4] = 1.0;
  }
  const auto a = ScoreAttention(eye, s);
  CHECK(a.diagonality == doctest::Approx(1.0));
  CHECK(a.verticality == doctest::Approx(1.0));
  CHECK(a.globality == doctest::Approx(0.0));
  const auto u = ScoreAttention(uniform, s);
  CHECK(u.globality == doctest::Approx(1.0));
  CHECK(u.verticality == doctest::Approx(1.0));
  CHECK(u.diagonality > 0);
  CHECK(u.diagonality < 1);
  const auto c = ScoreAttention(column, s);
  CHECK(c.verticality == doctest::Approx(static_cast<double>(s)));
  CHECK(c.globality == doctest::Approx(0.0));
  CHECK(ScoreAttention(std::vector<double>{1.0}, 1).globality == 1.0);
  CHECK_THROWS_AS(ScoreAttention(eye, 8), DimensionError);
}

TEST_CASE("rtf") {
  CHECK(MeasureRtf([] {}, 1.0) < 1e-3);
  Waveform w;
  w.samples = RandomVector(12000, 6);
  const auto mag = Magnitude(Stft(w, StftConfig{}));
  const double rtf1 = MeasureRtf([&] { GriffinLim(mag, StftConfig{}, 24000, 1); }, w.duration());
  const double rtf32 = MeasureRtf([&] { GriffinLim(mag, StftConfig{}, 24000, 32); }, w.duration());
  CHECK(rtf32 > rtf1);
  CHECK_THROWS_AS(MeasureRtf([] {}, 0.0), DomainError);
}

}  // namespace
}  // namespace dereverb
