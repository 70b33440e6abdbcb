// tests/room_sim_test.cc

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
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "dereverb/errors.h"
#include "dereverb/room_sim.h"
#include "dereverb/wav.h"
#include "test_util.h"

namespace dereverb {
namespace {

namespace fs = std::filesystem;
using testing::RandomVector;

std::string Slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TEST_CASE("sabine reflection coefficient") {
  RoomSpec spec;
  spec.t60 = 0.3;
  // V = 40, S = 72.
  const double alpha = 0.161 * 40.0 / (0.3 * 72.0);
  CHECK(alpha == doctest::Approx(0.2981).epsilon(1e-3));
  CHECK(T60ToReflection(spec) == doctest::Approx(std::sqrt(1 - alpha)).epsilon(1e-12));
  CHECK(T60ToReflection(spec) == doctest::Approx(0.8378).epsilon(1e-4));
  spec.t60 = 1e9;
  CHECK(T60ToReflection(spec) == doctest::Approx(1.0).epsilon(1e-9));
  spec.t60 = 0.05;
  CHECK_THROWS_AS(T60ToReflection(spec), InfeasibleError);
  spec.t60 = 0;
  CHECK_THROWS_AS(T60ToReflection(spec), DomainError);
}

TEST_CASE("anechoic rir is a single band-limited impulse") {
  RoomSpec spec;
  spec.reflection = 0.0;
  const Rir rir = ImageMethodRir(spec, "anechoic");
  const auto& h = rir.waveform.samples;
  CHECK(h.size() >= static_cast<std::size_t>(1.2 * spec.t60 * spec.sample_rate));
  const double delay = Distance(spec.source, spec.mic) / 343.0 * 24000.0;
  double total = 0, outside = 0;
  for (std::size_t n = 0; n < h.size(); ++n) {
    total += h[n] * h[n];
    if (std::abs(static_cast<double>(n) - delay) > 40.5) outside += h[n] * h[n];
  }
  CHECK(total > 0);
  CHECK(outside / total < 1e-8);
  CHECK(rir.DirectPathSample() == 70);
}

TEST_CASE("direct path delay matches geometry") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    RoomSpec spec;
    spec.t60 = 0.25;
    for (int a = 0; a < 3; ++a) {
      spec.source[a] = 0.5 + u(rng) * (spec.dims[a] - 1.0);
      spec.mic[a] = 0.5 + u(rng) * (spec.dims[a] - 1.0);
    }
    if (Distance(spec.source, spec.mic) < 0.5) continue;
    const Rir rir = ImageMethodRir(spec);
    const double delay = Distance(spec.source, spec.mic) / spec.speed_of_sound * spec.sample_rate;
    CHECK(std::abs(static_cast<double>(rir.DirectPathSample()) - delay) <= 1.0);
    ++checked;
  }
}

TEST_CASE("schroeder estimator recovers a synthetic exponential decay") {
  // Gaussian noise under a 60 dB / 0.5 s envelope.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const double fs = 24000, t60 = 0.5;
  std::vector<double> h(static_cast<std::size_t>(1.5 * t60 * fs));
  for (std::size_t i = 0; i < h.size(); ++i)
    h[i] = n(rng) * std::pow(10.0, -3.0 * (i / fs) / t60);
  CHECK(EstimateT60(h, fs) == doctest::Approx(t60).epsilon(0.03));

  RoomSpec spec;
  spec.t60 = 0.6;
  const auto edc = SchroederCurveDb(ImageMethodRir(spec).waveform.samples);
  CHECK(edc.front() == doctest::Approx(0.0));
  for (std::size_t i = 1; i < edc.size(); ++i) CHECK(edc[i] <= edc[i - 1] + 1e-9);
}

TEST_CASE("rir decay grows with t60") {
  double prev = 0;
  for (double t60 : {0.3, 0.6, 0.9}) {
    RoomSpec spec;
    spec.t60 = t60;
    const double est = EstimateT60(ImageMethodRir(spec).waveform.samples, spec.sample_rate);
    CHECK(est > prev);
    prev = est;
  }
}

TEST_CASE("mic circle sampling") {
  const Vec3 center{2, 2, 1.25};
  const auto mics = SampleMicCircle(center, {4, 4, 2.5}, 1.0, 11, 5);
  REQUIRE(mics.size() == 11);
  std::set<double> angles;
  for (const auto& m : mics) {
    CHECK(std::abs(Distance(m, center) - 1.0) < 1e-12);
    CHECK(m[2] == center[2]);
    angles.insert(std::atan2(m[1] - center[1], m[0] - center[0]));
  }
  CHECK(angles.size() == 11);
  CHECK(SampleMicCircle(center, {4, 4, 2.5}, 1.0, 11, 5) == mics);
  CHECK(SampleMicCircle(center, {4, 4, 2.5}, 1.0, 11, 6) != mics);
  CHECK_THROWS_AS(SampleMicCircle(center, {4, 4, 2.5}, 2.5, 11, 5), GeometryError);
}

TEST_CASE("convolution") {
  Waveform x;
  x.samples = RandomVector(4096, 1);
  Rir delta;
  delta.waveform.samples.assign(200, 0.0);
  delta.waveform.samples[0] = 1.0;
  auto y = Convolve(x, delta);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y.samples[i] - x.samples[i]) < 1e-12);

  delta.waveform.samples[0] = 0.0;
  delta.waveform.samples[100] = 1.0;
  y = Convolve(x, delta);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double want = i < 100 ? 0.0 : x.samples[i - 100];
    CHECK(std::abs(y.samples[i] - want) < 1e-12);
  }

  const auto h = RandomVector(512, 2);
  const auto full = FullConvolution(x.samples, h);
  REQUIRE(full.size() == 4096 + 512 - 1);
  double worst = 0;
  for (std::size_t n = 0; n < full.size(); ++n) {
    double acc = 0;
    for (std::size_t k = 0; k < h.size(); ++k)
      if (n >= k && n - k < x.size()) acc += h[k] * x.samples[n - k];
    worst = std::max(worst, std::abs(acc - full[n]));
  }
  CHECK(worst < 1e-9);

  // Linearity and shift equivariance.
  const auto x2 = RandomVector(4096, 3);
  std::vector<double> mix(4096), shifted(4096, 0.0);
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 0.3 * x.samples[i] - 2.0 * x2[i];
  for (std::size_t i = 37; i < shifted.size(); ++i) shifted[i] = x.samples[i - 37];
  const auto c1 = FullConvolution(x.samples, h), c2 = FullConvolution(x2, h);
  const auto cm = FullConvolution(mix, h), cs = FullConvolution(shifted, h);
  worst = 0;
  for (std::size_t n = 0; n < cm.size(); ++n) {
    worst = std::max(worst, std::abs(cm[n] - (0.3 * c1[n] - 2.0 * c2[n])));
    if (n >= 37 && n < 4096) worst = std::max(worst, std::abs(cs[n] - c1[n - 37]));
  }
  CHECK(worst < 1e-9);

  delta.waveform.sample_rate = 16000;
  CHECK_THROWS_AS(Convolve(x, delta), ContractError);
}

TEST_CASE("speech-like generator") {
  const auto a = GenerateSpeechLike({.duration = 1.5}, 9);
  const auto b = GenerateSpeechLike({.duration = 1.5}, 9);
  CHECK(a.samples == b.samples);
  CHECK(a.size() == 36000);
  double peak = 0;
  for (double v : a.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak == doctest::Approx(0.5).epsilon(0.01));
  CHECK(GenerateSpeechLike({.duration = 1.5}, 10).samples != a.samples);
  CHECK_THROWS_AS(GenerateSpeechLike({.duration = 0}, 1), DomainError);
}

TEST_CASE("build dataset") {
  const fs::path root = fs::temp_directory_path() / "dereverb_room_sim_test";
  fs::remove_all(root);
  const auto clean_dir = GenerateCleanCorpus(root, 6, 4, 0.5, 0.8);
  DatasetOptions opt;
  opt.seed = 21;
  const auto m = BuildDataset(clean_dir, root / "a", opt);
  REQUIRE(m.entries.size() == 6);

  std::size_t rir_files = 0;
  for (const auto& e : fs::directory_iterator(root / "a" / "rirs")) rir_files += e.is_regular_file();
  CHECK(rir_files == 33);

  std::set<Split> seen;
  for (const auto& e : m.entries) {
    seen.insert(e.split);
    CHECK(fs::exists(m.Resolve(e.clean_path)));
    CHECK(fs::exists(m.Resolve(e.reverb_path)));
    const bool held_out = e.rir_id.ends_with("_rir_10");
    CHECK(held_out == (e.split == Split::kTest));
    const auto clean = ReadWav(m.Resolve(e.clean_path));
    const auto reverb = ReadWav(m.Resolve(e.reverb_path));
    CHECK(clean.size() == reverb.size());
  }
  CHECK(seen.size() == 3);

  const auto read = ReadManifest(root / "a" / "manifest.jsonl");
  REQUIRE(read.entries.size() == m.entries.size());
  CHECK(read.entries[0].rir_id == m.entries[0].rir_id);

  BuildDataset(clean_dir, root / "b", opt);
  CHECK(Slurp(root / "a" / "manifest.jsonl") == Slurp(root / "b" / "manifest.jsonl"));

  fs::create_directories(root / "empty");
  CHECK_THROWS_AS(BuildDataset(root / "empty", root / "c", opt), IoError);
  fs::remove_all(root);
}

}  // namespace
}  // namespace dereverb
