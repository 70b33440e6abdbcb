// src/room_sim.cc

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

#include "dereverb/room_sim.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "dereverb/errors.h"
#include "dereverb/wav.h"
#include "json.hpp"

namespace dereverb {

namespace {

constexpr int kSincTaps = 81;
constexpr int kSincHalf = kSincTaps / 2;
constexpr int kFracSteps = 2048;

// table[k][j]: tap j of the Hann-windowed sinc for fractional delay k/kFracSteps.
const std::vector<double>& FractionalDelayTable() {
  static const std::vector<double> table = [] {
    std::vector<double> t((kFracSteps + 1) * kSincTaps);
    for (int k = 0; k <= kFracSteps; ++k) {
      const double frac = static_cast<double>(k) / kFracSteps;
      for (int j = 0; j < kSincTaps; ++j) {
        const double x = (j - kSincHalf) - frac;
        const double sinc = x == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
        const double win = 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * x / kSincTaps));
        t[k * kSincTaps + j] = sinc * win;
      }
    }
    return t;
  }();
  return table;
}

std::string FormatT60(double t60) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", t60);
  return buf;
}

std::string Relative(const std::filesystem::path& p, const std::filesystem::path& root) {
  const auto rel = p.lexically_relative(root);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.generic_string();
}

}  // namespace

double Distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

void RoomSpec::Validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!(dims[i] > 0)) throw GeometryError("room dimensions must be positive");
    if (!(source[i] > 0 && source[i] < dims[i]))
      throw GeometryError("source lies outside the room");
    if (!(mic[i] > 0 && mic[i] < dims[i])) throw GeometryError("microphone lies outside the room");
  }
  if (!(t60 > 0)) throw DomainError("t60 must be positive");
  if (!(sample_rate > 0) || !(speed_of_sound > 0))
    throw DomainError("sample rate and speed of sound must be positive");
  if (reflection && !(*reflection >= 0 && *reflection <= 1))
    throw DomainError("reflection coefficient must lie in [0, 1]");
}

std::size_t Rir::DirectPathSample() const {
  const auto& s = waveform.samples;
  double peak = 0;
  for (double v : s) peak = std::max(peak, std::abs(v));
  if (peak == 0) throw ContractError("RIR is all zeros");
  std::size_t n = 0;
  while (std::abs(s[n]) < 0.5 * peak) ++n;
  return n;
}

double T60ToReflection(const RoomSpec& spec) {
  if (!(spec.t60 > 0)) throw DomainError("t60 must be positive");
  const auto& d = spec.dims;
  const double volume = d[0] * d[1] * d[2];
  const double surface = 2.0 * (d[0] * d[1] + d[0] * d[2] + d[1] * d[2]);
  const double alpha = 0.161 * volume / (spec.t60 * surface);
  if (alpha >= 1.0) {
    throw InfeasibleError("t60 of " + std::to_string(spec.t60) +
                          " s needs absorption >= 1 in this room");
  }
  return std::sqrt(std::max(0.0, 1.0 - alpha));
}

Rir ImageMethodRir(const RoomSpec& spec, std::string id) {
  spec.Validate();
  const double beta = spec.reflection ? *spec.reflection : T60ToReflection(spec);
  const double fs = spec.sample_rate;
  const double c = spec.speed_of_sound;
  const auto length = static_cast<std::size_t>(std::ceil(1.2 * spec.t60 * fs));
  const double max_path = static_cast<double>(length + kSincHalf) / fs * c;

  std::array<int, 3> order{};
  for (int a = 0; a < 3; ++a) {
    order[a] = spec.max_order > 0
                   ? spec.max_order
                   : static_cast<int>(std::ceil(max_path / (2.0 * spec.dims[a]))) + 1;
  }

  // Per axis: image coordinate offsets and reflection counts for every
  // (n, q), precomputed so the triple loop only combines them.
  struct AxisImage {
    double delta;
    int reflections;
  };
  std::array<std::vector<AxisImage>, 3> axes;
  for (int a = 0; a < 3; ++a) {
    for (int n = -order[a]; n <= order[a]; ++n) {
      for (int q = 0; q <= 1; ++q) {
        const double pos = (1 - 2 * q) * spec.source[a] + 2.0 * n * spec.dims[a];
        axes[a].push_back({pos - spec.mic[a], std::abs(n - q) + std::abs(n)});
      }
    }
  }

  std::vector<double> h(length, 0.0);
  const auto& table = FractionalDelayTable();
  const double max_path_sq = max_path * max_path;
  for (const auto& ix : axes[0]) {
    const double dx2 = ix.delta * ix.delta;
    if (dx2 > max_path_sq) continue;
    for (const auto& iy : axes[1]) {
      const double dxy2 = dx2 + iy.delta * iy.delta;
      if (dxy2 > max_path_sq) continue;
      for (const auto& iz : axes[2]) {
        const double d2 = dxy2 + iz.delta * iz.delta;
        if (d2 > max_path_sq) continue;
        const int refl = ix.reflections + iy.reflections + iz.reflections;
        const double gain = refl == 0 ? 1.0 : std::pow(beta, refl);
        if (gain == 0.0) continue;
        const double dist = std::sqrt(d2);
        const double amp = gain / (4.0 * std::numbers::pi * dist);
        const double delay = dist / c * fs;
        const double base = std::floor(delay);
        const auto k = static_cast<int>(std::lround((delay - base) * kFracSteps));
        const long start = static_cast<long>(base) - kSincHalf;
        const double* taps = &table[k * kSincTaps];
        for (int j = 0; j < kSincTaps; ++j) {
          const long n = start + j;
          if (n >= 0 && n < static_cast<long>(length)) h[n] += amp * taps[j];
        }
      }
    }
  }
  Rir rir;
  rir.waveform.samples = std::move(h);
  rir.waveform.sample_rate = fs;
  rir.spec = spec;
  rir.id = std::move(id);
  return rir;
}

std::vector<Vec3> SampleMicCircle(const Vec3& center, const Vec3& room_dims, double radius,
                                  std::size_t count, std::uint64_t seed) {
  if (!(radius > 0)) throw DomainError("circle radius must be positive");
  if (center[0] - radius <= 0 || center[0] + radius >= room_dims[0] ||
      center[1] - radius <= 0 || center[1] + radius >= room_dims[1] || center[2] <= 0 ||
      center[2] >= room_dims[2]) {
    throw GeometryError("microphone circle of radius " + std::to_string(radius) +
                        " m leaves the room");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<double> angles;
  while (angles.size() < count) {
    const double a = angle(rng);
    // Angles closer than 1e-9 rad would give the same RIR.
    if (std::none_of(angles.begin(), angles.end(),
                     [a](double b) { return std::abs(a - b) < 1e-9; })) {
      angles.push_back(a);
    }
  }
  std::vector<Vec3> out;
  out.reserve(count);
  for (double a : angles) {
    out.push_back({center[0] + radius * std::cos(a), center[1] + radius * std::sin(a), center[2]});
  }
  return out;
}

std::vector<double> FullConvolution(std::span<const double> x, std::span<const double> h) {
  if (x.empty() || h.empty()) return {};
  const std::size_t out_len = x.size() + h.size() - 1;
  std::vector<double> y(out_len, 0.0);
  const std::size_t n = NextPowerOfTwo(std::max<std::size_t>(2 * h.size(), 1024));
  const std::size_t block = n - h.size() + 1;
  Fft fft(n);
  std::vector<Complex> hf(n);
  for (std::size_t i = 0; i < h.size(); ++i) hf[i] = h[i];
  fft.Forward(hf);
  std::vector<Complex> buf(n);
  for (std::size_t start = 0; start < x.size(); start += block) {
    const std::size_t len = std::min(block, x.size() - start);
    std::fill(buf.begin(), buf.end(), Complex(0.0));
    for (std::size_t i = 0; i < len; ++i) buf[i] = x[start + i];
    fft.Forward(buf);
    for (std::size_t i = 0; i < n; ++i) buf[i] *= hf[i];
    fft.Inverse(buf);
    const std::size_t valid = std::min(n, out_len - start);
    for (std::size_t i = 0; i < valid; ++i) y[start + i] += buf[i].real();
  }
  return y;
}

Waveform Convolve(const Waveform& x, const Rir& h) {
  if (x.sample_rate != h.waveform.sample_rate) {
    throw ContractError("convolve: sample rates differ (" + std::to_string(x.sample_rate) +
                        " vs " + std::to_string(h.waveform.sample_rate) + ")");
  }
  Waveform y;
  y.sample_rate = x.sample_rate;
  y.samples = FullConvolution(x.samples, h.waveform.samples);
  y.samples.resize(x.size());
  return y;
}

std::vector<double> SchroederCurveDb(std::span<const double> rir) {
  std::vector<double> edc(rir.size());
  double acc = 0;
  for (std::size_t i = rir.size(); i-- > 0;) {
    acc += rir[i] * rir[i];
    edc[i] = acc;
  }
  if (acc <= 0) throw ContractError("schroeder: RIR has no energy");
  for (double& e : edc) e = 10.0 * std::log10(std::max(e / acc, 1e-300));
  return edc;
}

double EstimateT60(std::span<const double> rir, double sample_rate) {
  const auto edc = SchroederCurveDb(rir);
  double st = 0, se = 0, stt = 0, ste = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < edc.size(); ++i) {
    if (edc[i] > -5.0 || edc[i] < -35.0) continue;
    const double t = static_cast<double>(i) / sample_rate;
    st += t;
    se += edc[i];
    stt += t * t;
    ste += t * edc[i];
    ++n;
  }
  if (n < 2) throw NumericError("schroeder: decay never spans -5..-35 dB");
  const double slope = (n * ste - st * se) / (n * stt - st * st);
  if (!(slope < 0)) throw NumericError("schroeder: energy curve does not decay");
  return -60.0 / slope;
}

std::string SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "train";
}

Split ParseSplit(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw IoError("unknown split '" + name + "'");
}

std::filesystem::path DatasetManifest::Resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : root / p;
}

std::vector<ManifestEntry> DatasetManifest::Select(Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

void WriteManifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json j;
    j["utt_id"] = e.utt_id;
    j["clean_path"] = e.clean_path;
    j["reverb_path"] = e.reverb_path;
    j["rir_id"] = e.rir_id;
    j["t60"] = e.t60;
    j["split"] = SplitName(e.split);
    os << j.dump() << '\n';
  }
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

DatasetManifest ReadManifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest '" + path.string() + "'");
  DatasetManifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.utt_id = j.at("utt_id").get<std::string>();
      e.clean_path = j.at("clean_path").get<std::string>();
      e.reverb_path = j.at("reverb_path").get<std::string>();
      e.rir_id = j.at("rir_id").get<std::string>();
      e.t60 = j.at("t60").get<double>();
      e.split = ParseSplit(j.at("split").get<std::string>());
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return m;
}

DatasetManifest BuildDataset(const std::filesystem::path& clean_dir,
                             const std::filesystem::path& out_dir,
                             const DatasetOptions& options) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(clean_dir))
    throw IoError("clean directory '" + clean_dir.string() + "' does not exist");
  std::vector<fs::path> clean_files;
  for (const auto& entry : fs::directory_iterator(clean_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      clean_files.push_back(entry.path());
  }
  if (clean_files.empty())
    throw IoError("no .wav files in '" + clean_dir.string() + "'");
  std::sort(clean_files.begin(), clean_files.end());
  if (options.rirs_per_t60 < 2) throw ConfigError("need at least 2 RIRs per t60");
  if (options.t60s.empty()) throw ConfigError("empty t60 list");

  const fs::path out = fs::absolute(out_dir).lexically_normal();
  fs::create_directories(out / "rirs");
  fs::create_directories(out / "reverb");

  // RIR pools.
  RoomSpec base;
  base.source = {base.dims[0] / 2, base.dims[1] / 2, base.dims[2] / 2};
  std::vector<Rir> rirs;
  std::vector<std::size_t> train_pool, test_pool;
  for (std::size_t ti = 0; ti < options.t60s.size(); ++ti) {
    const auto mics = SampleMicCircle(base.source, base.dims, 1.0, options.rirs_per_t60,
                                      options.seed * 7919 + ti);
    for (std::size_t r = 0; r < mics.size(); ++r) {
      RoomSpec spec = base;
      spec.t60 = options.t60s[ti];
      spec.mic = mics[r];
      char id[64];
      std::snprintf(id, sizeof(id), "t60_%s_rir_%02zu", FormatT60(spec.t60).c_str(), r);
      (r + 1 == mics.size() ? test_pool : train_pool).push_back(rirs.size());
      rirs.push_back(ImageMethodRir(spec, id));
      WriteWav(out / "rirs" / (std::string(id) + ".wav"), rirs.back().waveform);
    }
  }

  // Splits: a seeded shuffle, test first, then valid, rest train.
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(clean_files.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n = clean_files.size();
  std::size_t n_test = static_cast<std::size_t>(std::lround(options.test_fraction * n));
  std::size_t n_valid = static_cast<std::size_t>(std::lround(options.valid_fraction * n));
  if (n >= 3) {
    n_test = std::max<std::size_t>(n_test, options.test_fraction > 0 ? 1 : 0);
    n_valid = std::max<std::size_t>(n_valid, options.valid_fraction > 0 ? 1 : 0);
  }
  if (n_test + n_valid >= n) n_test = n_valid = 0;
  std::vector<Split> splits(n, Split::kTrain);
  for (std::size_t k = 0; k < n_test; ++k) splits[order[k]] = Split::kTest;
  for (std::size_t k = n_test; k < n_test + n_valid; ++k) splits[order[k]] = Split::kValid;

  DatasetManifest manifest;
  manifest.root = out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pool = splits[i] == Split::kTest ? test_pool : train_pool;
    const Rir& rir = rirs[pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]];
    Waveform clean = ReadWav(clean_files[i]);
    fs::path clean_path = fs::absolute(clean_files[i]).lexically_normal();
    if (clean.sample_rate != base.sample_rate) {
      clean = Resample(clean, base.sample_rate);
      fs::create_directories(out / "clean_resampled");
      clean_path = out / "clean_resampled" / clean_files[i].filename();
      WriteWav(clean_path, clean);
    }
    // Scaled so the direct path reaches the microphone at unit gain.
    Waveform reverb = Convolve(clean, rir);
    const double gain = 4.0 * std::numbers::pi * Distance(rir.spec.source, rir.spec.mic);
    for (double& s : reverb.samples) s *= gain;
    const std::string utt_id = clean_files[i].stem().string();
    const fs::path reverb_path = out / "reverb" / (utt_id + ".wav");
    WriteWav(reverb_path, reverb);
    ManifestEntry e;
    e.utt_id = utt_id;
    e.clean_path = Relative(clean_path, out);
    e.reverb_path = Relative(reverb_path, out);
    e.rir_id = rir.id;
    e.t60 = rir.spec.t60;
    e.split = splits[i];
    manifest.entries.push_back(std::move(e));
  }
  WriteManifest(out / "manifest.jsonl", manifest);
  return manifest;
}

std::filesystem::path GenerateCleanCorpus(const std::filesystem::path& out_dir,
                                          std::size_t count, std::uint64_t seed,
                                          double min_duration, double max_duration) {
  if (count == 0) throw ConfigError("clean corpus needs at least one utterance");
  if (!(min_duration > 0) || max_duration < min_duration)
    throw ConfigError("bad utterance duration range");
  const auto dir = out_dir / "clean";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dur(min_duration, max_duration);
  for (std::size_t i = 0; i < count; ++i) {
    SpeechLikeOptions opt;
    opt.duration = dur(rng);
    const Waveform w = GenerateSpeechLike(opt, seed * 1000003 + i);
    char name[32];
    std::snprintf(name, sizeof(name), "utt_%04zu.wav", i);
    WriteWav(dir / name, w);
  }
  return dir;
}

}  // namespace dereverb
