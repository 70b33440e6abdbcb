// include/dereverb/room_sim.h

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

#ifndef DEREVERB_ROOM_SIM_H_
#define DEREVERB_ROOM_SIM_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dereverb/dsp.h"

namespace dereverb {

using Vec3 = std::array<double, 3>;

double Distance(const Vec3& a, const Vec3& b);

// Shoebox room with one source and one omnidirectional microphone.
struct RoomSpec {
  Vec3 dims = {4.0, 4.0, 2.5};
  double t60 = 0.6;
  Vec3 source = {2.0, 2.0, 1.25};
  Vec3 mic = {3.0, 2.0, 1.25};
  double sample_rate = 24000.0;
  double speed_of_sound = 343.0;
  // Image order per axis; 0 derives it from the response length.
  int max_order = 0;
  // Overrides the Sabine wall reflection coefficient (0 gives an anechoic
  // response).
  std::optional<double> reflection;

  // Positive dims and t60, positions strictly inside the room.
  void Validate() const;
};

struct Rir {
  Waveform waveform;
  RoomSpec spec;
  std::string id;

  // Onset of the direct path: the first sample reaching half the peak
  // magnitude. Clusters of coincident reflections can outgrow the direct
  // sound, so the global peak is not used.
  std::size_t DirectPathSample() const;
};

// Sabine absorption α = 0.161·V / (t60·S); uniform wall reflection
// coefficient β = sqrt(1 − α). Throws InfeasibleError when α >= 1.
double T60ToReflection(const RoomSpec& spec);

// Classical image method. Every image source contributes
// β^reflections / (4π·distance) at delay distance/c·fs, spread over an
// 81-tap Hann-windowed sinc for fractional placement. The response lasts
// at least 1.2·t60 seconds; images are enumerated out to that path length.
Rir ImageMethodRir(const RoomSpec& spec, std::string id = {});

// Uniformly random angles on a horizontal circle around `center`; the
// returned positions share the center's height. Coincident angles are
// redrawn. Throws GeometryError if the circle leaves the room.
std::vector<Vec3> SampleMicCircle(const Vec3& center, const Vec3& room_dims, double radius,
                                  std::size_t count, std::uint64_t seed);

// Full linear convolution (length len(x) + len(h) − 1) by FFT overlap-add.
std::vector<double> FullConvolution(std::span<const double> x, std::span<const double> h);

// y = h ∗ x truncated to len(x). Throws ContractError on a rate mismatch.
Waveform Convolve(const Waveform& x, const Rir& h);

// Decay time estimated from the Schroeder backward-integrated energy curve:
// least-squares line over the −5 dB .. −35 dB range, extrapolated to −60 dB.
double EstimateT60(std::span<const double> rir, double sample_rate);

// Backward-integrated energy in dB relative to the total.
std::vector<double> SchroederCurveDb(std::span<const double> rir);

struct SpeechLikeOptions {
  double duration = 2.0;
  double sample_rate = 24000.0;
  double max_harmonic_hz = 7000.0;
  // RMS of the white noise floor added after peak normalization.
  double noise_floor_rms = 3e-4;
  double peak = 0.5;
};

// Harmonic "syllables" with random pitch contours, moving formant envelopes
// and attack/release envelopes, occasional noise bursts, separated by
// pauses, over a low white-noise floor.
Waveform GenerateSpeechLike(const SpeechLikeOptions& options, std::uint64_t seed);

enum class Split { kTrain, kValid, kTest };
std::string SplitName(Split split);
Split ParseSplit(const std::string& name);

struct ManifestEntry {
  std::string utt_id;
  std::string clean_path;
  std::string reverb_path;
  std::string rir_id;
  double t60 = 0;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  // Directory that relative paths are resolved against.
  std::filesystem::path root;

  std::filesystem::path Resolve(const std::string& path) const;
  std::vector<ManifestEntry> Select(Split split) const;
};

// JSON lines, one entry per utterance.
void WriteManifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest ReadManifest(const std::filesystem::path& path);

struct DatasetOptions {
  std::vector<double> t60s = {0.3, 0.6, 0.9};
  std::size_t rirs_per_t60 = 11;  // the last one is held out for testing
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 1;
};

// Builds the reverberant corpus: per T60, `rirs_per_t60` microphone
// positions on the 1 m circle around the room center, all but one used for
// train/valid and one held out for test. Every clean file gets a split and a
// uniformly drawn RIR from its pool. Writes rirs/, reverb/ and
// manifest.jsonl under out_dir and returns the manifest.
DatasetManifest BuildDataset(const std::filesystem::path& clean_dir,
                             const std::filesystem::path& out_dir,
                             const DatasetOptions& options);

// Writes `count` speech-like clean utterances as clean/utt_XXXX.wav under
// out_dir and returns that directory.
std::filesystem::path GenerateCleanCorpus(const std::filesystem::path& out_dir,
                                          std::size_t count, std::uint64_t seed,
                                          double min_duration = 1.5,
                                          double max_duration = 3.0);

}  // namespace dereverb

#endif  // DEREVERB_ROOM_SIM_H_
