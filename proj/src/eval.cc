// src/eval.cc

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

#include "dereverb/eval.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <regex>
#include <thread>

#include "dereverb/archive.h"
#include "dereverb/errors.h"
#include "dereverb/wav.h"

namespace dereverb {

Enhancer::Enhancer(const Checkpoint& ckpt, std::size_t gl_iters, const FeatureConfig& features)
    : model_(ModelFromCheckpoint(ckpt)),
      input_stats_(ckpt.input_stats),
      target_stats_(ckpt.target_stats),
      gl_iters_(gl_iters),
      features_(features) {
  if (ckpt.model.r_dim != features.num_mels)
    throw ContractError("enhance: checkpoint expects " + std::to_string(ckpt.model.r_dim) +
                        " mel bands, features give " + std::to_string(features.num_mels));
}

LogMelSpectrogram Enhancer::PredictLogMel(const Waveform& noisy) const {
  const auto lm = ExtractLogMel(noisy, features_);
  const auto& cfg = model_.config();
  const auto stacked = StackFrames(Normalize(lm, input_stats_), cfg.d_rate);
  const Tensor pred = model_.Forward(stacked.ToTensor()).prediction;
  auto out = UnstackFrames(pred.data(), stacked.steps, cfg.r_dim, cfg.d_rate, lm.frames);
  out.normalized = true;
  out.stats = target_stats_;
  return Denormalize(out);
}

Waveform Enhancer::Enhance(const Waveform& noisy) const {
  const auto mag = MelToLinear(PredictLogMel(noisy), FilterbankFor(features_));
  Waveform out = GriffinLim(mag, features_.stft, features_.sample_rate, gl_iters_).waveform;
  out.samples.resize(noisy.size(), 0.0);
  return out;
}

double LogMelMse(const Waveform& est, const Waveform& ref, const FeatureConfig& features) {
  const auto a = ExtractLogMel(est, features);
  const auto b = ExtractLogMel(ref, features);
  const std::size_t n = std::min(a.frames, b.frames) * a.bins;
  if (n == 0) throw ContractError("mel_mse: no common frames");
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  return acc / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

SystemSpec SystemSpec::Parse(const std::string& text) {
  SystemSpec s;
  if (text == "noisy" || text == "NOISY") {
    s.kind = Kind::kNoisy;
    s.name = "NOISY";
  } else if (text == "wpe" || text == "WPE") {
    s.kind = Kind::kWpe;
    s.name = "WPE";
  } else {
    s.kind = Kind::kCheckpoint;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      s.checkpoint = text;
      s.name = s.checkpoint.stem().string();
    } else {
      s.name = text.substr(0, eq);
      s.checkpoint = text.substr(eq + 1);
    }
    if (s.name.empty() || s.checkpoint.empty())
      throw ConfigError("system spec '" + text + "': expected noisy, wpe or label=checkpoint");
  }
  return s;
}

const SystemSummary& MetricReport::Find(const std::string& system, double t60) const {
  for (const auto& s : summary)
    if (s.system == system && std::abs(s.t60 - t60) < 1e-9) return s;
  throw ContractError("report has no row for " + system + " at t60 " + std::to_string(t60));
}

namespace {

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string Full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string MetricReport::ToTable() const {
  const bool pesq = std::any_of(summary.begin(), summary.end(),
                                [](const SystemSummary& s) { return s.pesq.has_value(); });
  std::size_t name_w = 6;
  for (const auto& s : summary) name_w = std::max(name_w, s.system.size());
  std::string out;
  char line[256];
  double bucket = -1;
  for (const auto& s : summary) {
    if (s.t60 != bucket) {
      bucket = s.t60;
      if (!out.empty()) out += '\n';
      std::snprintf(line, sizeof line, "T60 = %.2f s\n  %-*s %4s %9s %9s %9s%s %9s %8s\n", s.t60,
                    static_cast<int>(name_w), "system", "n", "LSD(dB)", "SI-SDR", "mel-MSE",
                    pesq ? "      PESQ" : "", "params", "RTF");
      out += line;
    }
    const std::string params =
        s.params ? Fixed(static_cast<double>(*s.params) / 1e6, 2) + "M" : std::string("-");
    char p[32] = "";
    if (pesq && s.pesq) std::snprintf(p, sizeof p, " %9.3f", *s.pesq);
    else if (pesq) std::snprintf(p, sizeof p, " %9s", "-");
    std::snprintf(line, sizeof line, "  %-*s %4zu %9.3f %9.3f %9.4f%s %9s %8.4f\n",
                  static_cast<int>(name_w), s.system.c_str(), s.count, s.lsd_db, s.si_sdr_db,
                  s.mel_mse, p, params.c_str(), s.rtf);
    out += line;
  }
  return out;
}

void MetricReport::WriteSummaryCsv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << "t60,system,count,lsd_db,si_sdr_db,mel_mse,pesq,params,rtf\n";
  for (const auto& s : summary) {
    os << Fixed(s.t60, 2) << ',' << s.system << ',' << s.count << ',' << Full(s.lsd_db) << ','
       << Full(s.si_sdr_db) << ',' << Full(s.mel_mse) << ',' << (s.pesq ? Full(*s.pesq) : "")
       << ',' << (s.params ? std::to_string(*s.params) : "") << ',' << Full(s.rtf) << '\n';
  }
}

void MetricReport::WriteUtteranceCsv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << "utt_id,system,t60,lsd_db,si_sdr_db,mel_mse,pesq\n";
  for (const auto& u : utterances) {
    os << u.utt_id << ',' << u.system << ',' << Fixed(u.t60, 2) << ',' << Full(u.lsd_db) << ','
       << Full(u.si_sdr_db) << ',' << Full(u.mel_mse) << ',' << (u.pesq ? Full(*u.pesq) : "")
       << '\n';
  }
}

namespace {

double RunScorer(const std::string& cmd, const Waveform& ref, const Waveform& deg,
                 const std::filesystem::path& dir, const std::string& tag) {
  std::filesystem::create_directories(dir);
  const auto ref_path = dir / (tag + "_ref.wav");
  const auto deg_path = dir / (tag + "_deg.wav");
  WriteWav(ref_path, Resample(ref, 16000), WavEncoding::kFloat32);
  WriteWav(deg_path, Resample(deg, 16000), WavEncoding::kFloat32);
  const std::string full = cmd + " '" + ref_path.string() + "' '" + deg_path.string() + "'";
  FILE* pipe = popen(full.c_str(), "r");
  if (!pipe) throw IoError("cannot run scorer: " + full);
  std::string output;
  char buf[256];
  while (std::fgets(buf, sizeof buf, pipe)) output += buf;
  const int status = pclose(pipe);
  if (status != 0) throw IoError("scorer exited with status " + std::to_string(status) + ": " + full);
  static const std::regex number(R"([-+]?\d+(\.\d+)?([eE][-+]?\d+)?)");
  std::string last;
  for (std::sregex_iterator it(output.begin(), output.end(), number), end; it != end; ++it)
    last = it->str();
  if (last.empty()) throw IoError("scorer printed no number: " + full);
  return std::stod(last);
}

struct Accumulator {
  std::size_t count = 0;
  double lsd = 0, sdr = 0, mse = 0, pesq = 0, seconds = 0, audio = 0;
  bool has_pesq = false;
};

}  // namespace

MetricReport EvaluateSuite(const DatasetManifest& manifest, const std::vector<SystemSpec>& systems,
                           const EvalOptions& options) {
  auto tests = manifest.Select(Split::kTest);
  if (tests.empty()) throw ContractError("evaluate: manifest has no test entries");
  if (systems.empty()) throw ContractError("evaluate: no systems requested");
  if (options.max_utterances > 0 && tests.size() > options.max_utterances)
    tests.resize(options.max_utterances);

  std::vector<std::string> missing;
  for (const auto& e : tests) {
    for (const auto& p : {manifest.Resolve(e.clean_path), manifest.Resolve(e.reverb_path)})
      if (!std::filesystem::exists(p)) missing.push_back(p.string());
  }
  for (const auto& s : systems)
    if (s.kind == SystemSpec::Kind::kCheckpoint && !std::filesystem::exists(s.checkpoint))
      missing.push_back(s.checkpoint.string());
  if (!missing.empty()) {
    std::string msg = "evaluate: missing files:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw IoError(msg);
  }

  std::vector<std::optional<Enhancer>> enhancers(systems.size());
  std::vector<std::optional<std::size_t>> params(systems.size());
  for (std::size_t i = 0; i < systems.size(); ++i) {
    if (systems[i].kind != SystemSpec::Kind::kCheckpoint) continue;
    enhancers[i].emplace(LoadCheckpoint(systems[i].checkpoint), options.gl_iters);
    params[i] = enhancers[i]->model().CountParams().total();
  }

  struct Scored {
    UtteranceMetrics metrics;
    double seconds = 0;
    double audio = 0;
  };
  // One slot per (utterance, system) so the report order does not depend on
  // scheduling.
  std::vector<Scored> scored(tests.size() * systems.size());
  auto score_utterance = [&](std::size_t u) {
    const auto& e = tests[u];
    const Waveform clean = ReadWav(manifest.Resolve(e.clean_path));
    const Waveform noisy = ReadWav(manifest.Resolve(e.reverb_path));
    for (std::size_t i = 0; i < systems.size(); ++i) {
      const auto start = std::chrono::steady_clock::now();
      Waveform est;
      switch (systems[i].kind) {
        case SystemSpec::Kind::kNoisy: est = noisy; break;
        case SystemSpec::Kind::kWpe: est = WpeDereverb(noisy, options.wpe, options.lsd.stft); break;
        case SystemSpec::Kind::kCheckpoint: est = enhancers[i]->Enhance(noisy); break;
      }
      Scored& out = scored[u * systems.size() + i];
      out.seconds =
          systems[i].kind == SystemSpec::Kind::kNoisy
              ? 0.0
              : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      out.audio = noisy.duration();
      UtteranceMetrics& m = out.metrics;
      m.utt_id = e.utt_id;
      m.system = systems[i].name;
      m.t60 = e.t60;
      m.lsd_db = LogSpectralDistance(est, clean, options.lsd);
      m.si_sdr_db = AlignedSiSdr(est.samples, clean.samples);
      m.mel_mse = LogMelMse(est, clean);
      if (options.pesq_cmd)
        m.pesq = RunScorer(*options.pesq_cmd, clean, est,
                           options.scratch_dir.empty() ? std::filesystem::temp_directory_path()
                                                       : options.scratch_dir,
                           e.utt_id + "_" + systems[i].name);
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, tests.size());
  if (workers == 1) {
    for (std::size_t u = 0; u < tests.size(); ++u) score_utterance(u);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex error_mu;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t u; (u = next++) < tests.size();) {
          try {
            score_utterance(u);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!error) error = std::current_exception();
            next = tests.size();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  MetricReport report;
  std::map<std::pair<double, std::size_t>, Accumulator> acc;
  for (std::size_t k = 0; k < scored.size(); ++k) {
    Scored& sc = scored[k];
    Accumulator& a = acc[{sc.metrics.t60, k % systems.size()}];
    ++a.count;
    a.lsd += sc.metrics.lsd_db;
    a.sdr += sc.metrics.si_sdr_db;
    a.mse += sc.metrics.mel_mse;
    if (sc.metrics.pesq) {
      a.pesq += *sc.metrics.pesq;
      a.has_pesq = true;
    }
    a.seconds += sc.seconds;
    a.audio += sc.audio;
    report.utterances.push_back(std::move(sc.metrics));
  }
  for (const auto& [key, a] : acc) {
    SystemSummary s;
    s.t60 = key.first;
    s.system = systems[key.second].name;
    s.count = a.count;
    const double n = static_cast<double>(a.count);
    s.lsd_db = a.lsd / n;
    s.si_sdr_db = a.sdr / n;
    s.mel_mse = a.mse / n;
    if (a.has_pesq) s.pesq = a.pesq / n;
    s.params = params[key.second];
    s.rtf = a.audio > 0 ? a.seconds / a.audio : 0.0;
    report.summary.push_back(std::move(s));
  }
  return report;
}

// ---------------------------------------------------------------------------

AttentionDump ExportAttention(const DereverbModel& model, const StackedFrames& input) {
  const auto& cfg = model.config();
  if (cfg.encoder != EncoderKind::kBert)
    throw UnsupportedError("attention export needs a BERT encoder, model is " + cfg.Label());
  AttentionDump dump;
  dump.maps = model.Forward(input.ToTensor(), /*keep_attention=*/true).attention;
  dump.layers = dump.maps.size();
  dump.heads = cfg.a_num;
  dump.steps = input.steps;
  const std::size_t s = input.steps;
  for (const Tensor& layer : dump.maps)
    for (std::size_t h = 0; h < dump.heads; ++h)
      dump.scores.push_back(ScoreAttention(layer.data().subspan(h * s * s, s * s), s));
  return dump;
}

void WriteAttentionDump(const std::filesystem::path& path, const AttentionDump& dump) {
  TensorArchive ar;
  ar.meta = {{"kind", "dereverb-attention"},
             {"layers", dump.layers},
             {"heads", dump.heads},
             {"steps", dump.steps}};
  nlohmann::json scores = nlohmann::json::array();
  for (std::size_t i = 0; i < dump.scores.size(); ++i) {
    scores.push_back({{"layer", i / dump.heads},
                      {"head", i % dump.heads},
                      {"diagonality", dump.scores[i].diagonality},
                      {"verticality", dump.scores[i].verticality},
                      {"globality", dump.scores[i].globality}});
  }
  ar.meta["scores"] = std::move(scores);
  for (std::size_t l = 0; l < dump.maps.size(); ++l) ar.Add("layer" + std::to_string(l), dump.maps[l]);
  WriteArchive(path, ar);
}

ProbeResult MaskedRecoveryProbe(const DereverbModel& model, const std::vector<Utterance>& utts,
                                std::size_t centers, std::size_t half_width, std::uint64_t seed) {
  if (utts.empty() || centers == 0) throw ContractError("probe: need utterances and centers");
  std::mt19937_64 rng(seed);
  ProbeResult r;
  double delta_sum = 0;
  std::size_t delta_cells = 0;
  for (const auto& u : utts) {
    const StackedFrames& in = u.input;
    const std::size_t rd = in.r_dim, dr = in.d_rate;
    const Tensor base = model.Forward(in.ToTensor()).prediction;
    const auto base_m = UnstackFrames(base.data(), in.steps, rd, dr, in.orig_len);
    const auto target = UnstackFrames(u.target);
    std::uniform_int_distribution<std::size_t> pick(0, in.orig_len - 1);
    for (std::size_t c = 0; c < centers; ++c) {
      const auto masked = MaskConsecutive(in, pick(rng), half_width);
      const Tensor pred = model.Forward(masked.frames.ToTensor()).prediction;
      const auto pm = UnstackFrames(pred.data(), in.steps, rd, dr, in.orig_len);
      std::vector<bool> is_masked(in.orig_len, false);
      double mse = 0;
      for (std::size_t t : masked.raw_frames) {
        is_masked[t] = true;
        for (std::size_t b = 0; b < rd; ++b) {
          const double d = pm.at(t, b) - target.at(t, b);
          mse += d * d;
        }
      }
      r.masked_mse += mse / static_cast<double>(masked.raw_frames.size() * rd);
      for (std::size_t t = 0; t < in.orig_len; ++t) {
        if (is_masked[t]) continue;
        for (std::size_t b = 0; b < rd; ++b) delta_sum += std::abs(pm.at(t, b) - base_m.at(t, b));
        delta_cells += rd;
      }
      ++r.probes;
    }
  }
  r.masked_mse /= static_cast<double>(r.probes);
  r.unmasked_delta = delta_cells ? delta_sum / static_cast<double>(delta_cells) : 0.0;
  return r;
}

}  // namespace dereverb
