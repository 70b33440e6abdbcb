// tools/cli.cc

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

#include "cli.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dereverb/config.h"
#include "dereverb/errors.h"
#include "dereverb/eval.h"
#include "dereverb/model.h"
#include "dereverb/room_sim.h"
#include "dereverb/selftest.h"
#include "dereverb/train.h"
#include "dereverb/wav.h"
#include "dereverb/wpe.h"

namespace dereverb::cli {
namespace {

namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool seed_given = false;
};

// Prints the resolved settings and, when `dir` is given, keeps a copy there.
void LogConfig(std::ostream& out, const std::string& command, const KeyValues& kv,
               const std::optional<fs::path>& dir = std::nullopt) {
  std::ostringstream text;
  text << "# " << command << '\n';
  for (const auto& [k, v] : kv.entries) text << k << " = " << v << '\n';
  out << text.str();
  if (dir) {
    fs::create_directories(*dir);
    std::ofstream os(*dir / (command + ".config"));
    if (!os) throw IoError("cannot write " + (*dir / (command + ".config")).string());
    os << text.str();
  }
}

void EnsureParent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

std::string Fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string Join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + Fixed(x, 3);
  return s;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string clean_dir;
  std::size_t generate_clean = 0;
  double min_duration = 1.5;
  double max_duration = 3.0;
  std::string out_dir;
  DatasetOptions dataset;
};

int RunSynth(const SynthArgs& a, const Globals& g, std::ostream& out) {
  if (a.clean_dir.empty() == (a.generate_clean == 0))
    throw ConfigError("synth-data: give exactly one of --clean-dir and --generate-clean");
  DatasetOptions opt = a.dataset;
  opt.seed = g.seed;
  KeyValues kv;
  kv.Set("out_dir", a.out_dir);
  kv.Set("clean_dir", a.clean_dir.empty() ? "(generated)" : a.clean_dir);
  kv.Set("generate_clean", std::to_string(a.generate_clean));
  kv.Set("t60s", Join(opt.t60s));
  kv.Set("rirs_per_t60", std::to_string(opt.rirs_per_t60));
  kv.Set("valid_fraction", Fixed(opt.valid_fraction, 4));
  kv.Set("test_fraction", Fixed(opt.test_fraction, 4));
  kv.Set("seed", std::to_string(opt.seed));
  LogConfig(out, "synth-data", kv, fs::path(a.out_dir));
  fs::path clean = a.clean_dir;
  if (a.generate_clean > 0)
    clean = GenerateCleanCorpus(a.out_dir, a.generate_clean, g.seed, a.min_duration, a.max_duration);
  const auto manifest = BuildDataset(clean, a.out_dir, opt);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& e : manifest.entries) ++counts[static_cast<int>(e.split)];
  out << "wrote " << manifest.entries.size() << " entries (train " << counts[0] << ", valid "
      << counts[1] << ", test " << counts[2] << ") to "
      << (fs::path(a.out_dir) / "manifest.jsonl").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string preseq;
  std::string encoder;
  std::string config;
  std::string out_dir;
  std::string resume;
  std::size_t steps = 0;
  std::size_t stop_after = 0;
  bool reduced = false;
  std::size_t log_every = 100;
};

// Defaults < preset flag < config file < explicit flags.
void ResolveTrainConfig(const TrainArgs& a, const Globals& g, ModelConfig& model,
                        TrainConfig& train) {
  const PreseqKind p = a.preseq.empty() ? PreseqKind::kDef : ParsePreseq(a.preseq);
  const EncoderKind e = a.encoder.empty() ? EncoderKind::kBert : ParseEncoder(a.encoder);
  model = a.reduced ? ModelConfig::Reduced(p, e) : ModelConfig::Full(p, e);
  train = TrainConfig{};
  if (!a.config.empty()) ApplyRunConfig(ReadKeyValueFile(a.config), model, train);
  if (!a.preseq.empty()) model.preseq = p;
  if (!a.encoder.empty()) model.encoder = e;
  if (a.steps > 0) train.total_steps = a.steps;
  if (g.seed_given) {
    train.seed = g.seed;
    model.seed = g.seed;
  }
  model.Validate();
  train.Validate();
}

int RunTrain(const TrainArgs& a, const Globals& g, std::ostream& out) {
  ModelConfig model;
  TrainConfig train;
  ResolveTrainConfig(a, g, model, train);
  const std::string resolved = FormatRunConfig(model, train);
  out << "# train " << model.Label() << '\n' << resolved;
  fs::create_directories(a.out_dir);
  {
    std::ofstream os(fs::path(a.out_dir) / "train.config");
    if (!os) throw IoError("cannot write train.config in " + a.out_dir);
    os << resolved;
  }
  const auto data = PrepareTrainingData(ReadManifest(a.manifest), model.d_rate);
  out << "train utterances " << data.train.size() << ", valid " << data.valid.size()
      << ", parameters " << DereverbModel(model).CountParams().total() << '\n';
  TrainOptions opt;
  opt.out_dir = a.out_dir;
  if (!a.resume.empty()) opt.resume = a.resume;
  opt.stop_after = a.stop_after;
  opt.on_step = [&](const StepRecord& r) {
    if (r.valid_loss || (a.log_every > 0 && r.step % a.log_every == 0) || r.step == 1) {
      out << "step " << r.step << " lr " << r.lr << " train " << r.train_loss;
      if (r.valid_loss) out << " valid " << *r.valid_loss;
      out << std::endl;
    }
  };
  const auto result = TrainLoop(data, model, train, opt);
  out << "finished at step " << result.last_step;
  if (result.best_valid) out << ", best valid " << *result.best_valid;
  out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int RunEnhance(const std::string& ckpt, const std::string& in, const std::string& out_path,
               std::size_t gl_iters, std::ostream& out) {
  KeyValues kv;
  kv.Set("checkpoint", ckpt);
  kv.Set("in", in);
  kv.Set("out", out_path);
  kv.Set("gl_iters", std::to_string(gl_iters));
  LogConfig(out, "enhance", kv);
  const Enhancer enhancer(LoadCheckpoint(ckpt), gl_iters);
  const Waveform noisy = ReadWav(in);
  const Waveform est = enhancer.Enhance(noisy);
  EnsureParent(out_path);
  WriteWav(out_path, est);
  out << "wrote " << out_path << " (" << Fixed(est.duration(), 2) << " s)\n";
  return kExitOk;
}

int RunWpe(const std::string& in, const std::string& out_path, const WpeConfig& cfg,
           std::ostream& out) {
  KeyValues kv;
  kv.Set("in", in);
  kv.Set("out", out_path);
  kv.Set("taps", std::to_string(cfg.taps));
  kv.Set("delay", std::to_string(cfg.delay));
  kv.Set("iters", std::to_string(cfg.iterations));
  LogConfig(out, "wpe", kv);
  const Waveform y = ReadWav(in);
  const Waveform x = WpeDereverb(y, cfg);
  EnsureParent(out_path);
  WriteWav(out_path, x);
  out << "wrote " << out_path << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string manifest;
  std::vector<std::string> systems;
  std::string out;
  std::size_t max_utts = 0;
  std::size_t gl_iters = 32;
  std::string pesq_cmd;
};

int RunEvaluate(const EvalArgs& a, const Globals& g, std::ostream& out) {
  std::vector<SystemSpec> systems;
  for (const auto& s : a.systems) systems.push_back(SystemSpec::Parse(s));
  const fs::path report_path = a.out;
  const fs::path dir = report_path.has_parent_path() ? report_path.parent_path() : fs::path(".");
  const fs::path per_utt = dir / (report_path.stem().string() + "_utterances.csv");
  EvalOptions opt;
  opt.max_utterances = a.max_utts;
  opt.gl_iters = a.gl_iters;
  opt.threads = g.threads;
  if (!a.pesq_cmd.empty()) {
    opt.pesq_cmd = a.pesq_cmd;
    opt.scratch_dir = dir / (report_path.stem().string() + "_scorer");
  }
  KeyValues kv;
  kv.Set("manifest", a.manifest);
  std::string names;
  for (const auto& s : a.systems) names += (names.empty() ? "" : " ") + s;
  kv.Set("systems", names);
  kv.Set("out", a.out);
  kv.Set("max_utts", std::to_string(a.max_utts));
  kv.Set("gl_iters", std::to_string(a.gl_iters));
  kv.Set("lsd_band_hz", Fixed(opt.lsd.min_hz, 0) + "-" + Fixed(opt.lsd.max_hz, 0));
  kv.Set("pesq_cmd", a.pesq_cmd.empty() ? "none" : a.pesq_cmd);
  kv.Set("threads", std::to_string(g.threads));
  LogConfig(out, "evaluate", kv);
  const auto manifest = ReadManifest(a.manifest);
  if (opt.scratch_dir.has_filename()) fs::create_directories(opt.scratch_dir);
  const auto report = EvaluateSuite(manifest, systems, opt);
  fs::create_directories(dir);
  report.WriteSummaryCsv(report_path);
  report.WriteUtteranceCsv(per_utt);
  out << report.ToTable();
  out << "wrote " << report_path.string() << " and " << per_utt.string() << '\n';
  return kExitOk;
}

// Model input for a single recording, normalized with the checkpoint's stats.
StackedFrames InputFrames(const Checkpoint& ckpt, const Waveform& w) {
  return MakeUtterance("input", 0.0, w, w, ckpt.input_stats, ckpt.target_stats, ckpt.model.d_rate)
      .input;
}

int RunInspect(const std::string& ckpt_path, const std::string& wav, const std::string& out_path,
               std::ostream& out) {
  KeyValues kv;
  kv.Set("checkpoint", ckpt_path);
  kv.Set("wav", wav);
  kv.Set("out", out_path);
  LogConfig(out, "inspect-attention", kv);
  const Checkpoint ckpt = LoadCheckpoint(ckpt_path);
  const DereverbModel model = ModelFromCheckpoint(ckpt);
  const auto dump = ExportAttention(model, InputFrames(ckpt, ReadWav(wav)));
  EnsureParent(out_path);
  WriteAttentionDump(out_path, dump);
  out << "layer head diagonality verticality globality\n";
  for (std::size_t l = 0; l < dump.layers; ++l) {
    for (std::size_t h = 0; h < dump.heads; ++h) {
      const auto& s = dump.scores[l * dump.heads + h];
      out << l << ' ' << h << ' ' << Fixed(s.diagonality, 4) << ' ' << Fixed(s.verticality, 3)
          << ' ' << Fixed(s.globality, 4) << '\n';
    }
  }
  out << "wrote " << out_path << " (" << dump.layers << " layers x " << dump.heads << " heads, "
      << dump.steps << " steps)\n";
  return kExitOk;
}

void PrintCounts(std::ostream& out, const std::string& label, const ParamCounts& c) {
  out << std::left << std::setw(12) << label << std::right << std::setw(12) << c.preseq
      << std::setw(12) << c.encoder << std::setw(12) << c.decoder << std::setw(12) << c.total()
      << '\n';
}

int RunCountParams(const std::string& preseq, const std::string& encoder, bool reduced,
                   const std::string& ckpt, std::ostream& out) {
  out << std::left << std::setw(12) << "model" << std::right << std::setw(12) << "preseq"
      << std::setw(12) << "encoder" << std::setw(12) << "decoder" << std::setw(12) << "total"
      << '\n';
  if (!ckpt.empty()) {
    const Checkpoint c = LoadCheckpoint(ckpt);
    PrintCounts(out, c.model.Label(), ModelFromCheckpoint(c).CountParams());
    return kExitOk;
  }
  auto make = [&](PreseqKind p, EncoderKind e) {
    return reduced ? ModelConfig::Reduced(p, e) : ModelConfig::Full(p, e);
  };
  std::vector<PreseqKind> ps = {PreseqKind::kDef, PreseqKind::kCnn2d, PreseqKind::kCnn1d,
                                PreseqKind::kLstm, PreseqKind::kCl};
  std::vector<EncoderKind> es = {EncoderKind::kBert, EncoderKind::kBlstm};
  if (!preseq.empty()) ps = {ParsePreseq(preseq)};
  if (!encoder.empty()) es = {ParseEncoder(encoder)};
  for (EncoderKind e : es) {
    for (PreseqKind p : ps) {
      const DereverbModel m(make(p, e));
      PrintCounts(out, m.config().Label(), m.CountParams());
    }
  }
  return kExitOk;
}

struct ProbeArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "train";
  std::size_t centers = 4;
  std::size_t half_width = 4;
  std::size_t max_utts = 0;
};

int RunProbe(const ProbeArgs& a, const Globals& g, std::ostream& out) {
  KeyValues kv;
  kv.Set("checkpoint", a.checkpoint);
  kv.Set("manifest", a.manifest);
  kv.Set("split", a.split);
  kv.Set("centers", std::to_string(a.centers));
  kv.Set("half_width", std::to_string(a.half_width));
  kv.Set("max_utts", std::to_string(a.max_utts));
  kv.Set("seed", std::to_string(g.seed));
  LogConfig(out, "probe-mask", kv);
  const Checkpoint ckpt = LoadCheckpoint(a.checkpoint);
  const auto manifest = ReadManifest(a.manifest);
  auto entries = manifest.Select(ParseSplit(a.split));
  if (entries.empty()) throw ContractError("probe-mask: no " + a.split + " entries");
  if (a.max_utts > 0 && entries.size() > a.max_utts) entries.resize(a.max_utts);
  std::vector<Utterance> utts;
  for (const auto& e : entries)
    utts.push_back(MakeUtterance(e.utt_id, e.t60, ReadWav(manifest.Resolve(e.reverb_path)),
                                 ReadWav(manifest.Resolve(e.clean_path)), ckpt.input_stats,
                                 ckpt.target_stats, ckpt.model.d_rate));
  const DereverbModel trained = ModelFromCheckpoint(ckpt);
  const DereverbModel untrained(ckpt.model);
  const auto t = MaskedRecoveryProbe(trained, utts, a.centers, a.half_width, g.seed);
  const auto u = MaskedRecoveryProbe(untrained, utts, a.centers, a.half_width, g.seed);
  out << "probes " << t.probes << '\n'
      << "checkpoint masked_mse " << t.masked_mse << " unmasked_delta " << t.unmasked_delta << '\n'
      << "untrained  masked_mse " << u.masked_mse << " unmasked_delta " << u.unmasked_delta << '\n';
  return kExitOk;
}

}  // namespace

int Dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speech dereverberation with masked sequence models", "dereverb"};
  app.require_subcommand(0, 1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for per-utterance work")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth-data", "Build a reverberant corpus and manifest");
  s_synth->add_option("--clean-dir", synth.clean_dir, "Directory of clean wav files");
  s_synth->add_option("--generate-clean", synth.generate_clean,
                      "Generate N speech-like clean utterances instead");
  s_synth->add_option("--min-duration", synth.min_duration)->capture_default_str();
  s_synth->add_option("--max-duration", synth.max_duration)->capture_default_str();
  s_synth->add_option("--out-dir", synth.out_dir)->required();
  s_synth->add_option("--t60s", synth.dataset.t60s)->capture_default_str();
  s_synth->add_option("--rirs-per-t60", synth.dataset.rirs_per_t60)->capture_default_str();
  s_synth->add_option("--valid-fraction", synth.dataset.valid_fraction)->capture_default_str();
  s_synth->add_option("--test-fraction", synth.dataset.test_fraction)->capture_default_str();

  TrainArgs train;
  auto* s_train = app.add_subcommand("train", "Train a model from a manifest");
  s_train->add_option("--manifest", train.manifest)->required();
  s_train->add_option("--preseq", train.preseq, "def|cnn2d|cnn1d|lstm|cl");
  s_train->add_option("--encoder", train.encoder, "bert|blstm");
  s_train->add_option("--config", train.config, "key=value file");
  s_train->add_option("--out-dir", train.out_dir)->required();
  s_train->add_option("--resume", train.resume, "Checkpoint to continue from");
  s_train->add_option("--steps", train.steps, "Override total_steps");
  s_train->add_option("--stop-after", train.stop_after, "Stop and checkpoint after this step");
  s_train->add_flag("--reduced", train.reduced, "Start from the reduced preset");
  s_train->add_option("--log-every", train.log_every)->capture_default_str();

  std::string enh_ckpt, enh_in, enh_out;
  std::size_t enh_gl = 32;
  auto* s_enh = app.add_subcommand("enhance", "Dereverberate one wav with a checkpoint");
  s_enh->add_option("--checkpoint", enh_ckpt)->required();
  s_enh->add_option("--in", enh_in)->required();
  s_enh->add_option("--out", enh_out)->required();
  s_enh->add_option("--gl-iters", enh_gl)->capture_default_str();

  std::string wpe_in, wpe_out;
  WpeConfig wpe_cfg;
  auto* s_wpe = app.add_subcommand("wpe", "Dereverberate one wav with WPE");
  s_wpe->add_option("--in", wpe_in)->required();
  s_wpe->add_option("--out", wpe_out)->required();
  s_wpe->add_option("--taps", wpe_cfg.taps)->capture_default_str();
  s_wpe->add_option("--delay", wpe_cfg.delay)->capture_default_str();
  s_wpe->add_option("--iters", wpe_cfg.iterations)->capture_default_str();

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("evaluate", "Score systems on the test split");
  s_eval->add_option("--manifest", ev.manifest)->required();
  s_eval->add_option("--systems", ev.systems, "noisy, wpe, label=ckpt or ckpt")->required();
  s_eval->add_option("--out", ev.out, "Summary CSV")->required();
  s_eval->add_option("--max-utts", ev.max_utts)->capture_default_str();
  s_eval->add_option("--gl-iters", ev.gl_iters)->capture_default_str();
  s_eval->add_option("--pesq-cmd", ev.pesq_cmd, "External scorer: <cmd> ref.wav deg.wav");

  std::string ia_ckpt, ia_wav, ia_out;
  auto* s_ia = app.add_subcommand("inspect-attention", "Dump attention maps and scores");
  s_ia->add_option("--checkpoint", ia_ckpt)->required();
  s_ia->add_option("--wav", ia_wav)->required();
  s_ia->add_option("--out", ia_out)->required();

  std::string cp_preseq, cp_encoder, cp_ckpt;
  bool cp_reduced = false;
  auto* s_cp = app.add_subcommand("count-params", "Parameter counts per component");
  s_cp->add_option("--preseq", cp_preseq);
  s_cp->add_option("--encoder", cp_encoder);
  s_cp->add_flag("--reduced", cp_reduced);
  s_cp->add_option("--checkpoint", cp_ckpt);

  ProbeArgs probe;
  auto* s_probe = app.add_subcommand("probe-mask", "Masked-frame recovery against an untrained copy");
  s_probe->add_option("--checkpoint", probe.checkpoint)->required();
  s_probe->add_option("--manifest", probe.manifest)->required();
  s_probe->add_option("--split", probe.split)->capture_default_str();
  s_probe->add_option("--centers", probe.centers)->capture_default_str();
  s_probe->add_option("--half-width", probe.half_width)->capture_default_str();
  s_probe->add_option("--max-utts", probe.max_utts)->capture_default_str();

  auto* s_self = app.add_subcommand("selftest", "Numeric self-checks");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  if (argc <= 1) {
    err << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }
  g.seed_given = app.count("--seed") > 0;

  try {
    if (s_synth->parsed()) return RunSynth(synth, g, out);
    if (s_train->parsed()) return RunTrain(train, g, out);
    if (s_enh->parsed()) return RunEnhance(enh_ckpt, enh_in, enh_out, enh_gl, out);
    if (s_wpe->parsed()) return RunWpe(wpe_in, wpe_out, wpe_cfg, out);
    if (s_eval->parsed()) return RunEvaluate(ev, g, out);
    if (s_ia->parsed()) return RunInspect(ia_ckpt, ia_wav, ia_out, out);
    if (s_cp->parsed()) return RunCountParams(cp_preseq, cp_encoder, cp_reduced, cp_ckpt, out);
    if (s_probe->parsed()) return RunProbe(probe, g, out);
    if (s_self->parsed()) {
      bool ok = true;
      for (const auto& c : RunSelfTest(&out)) ok = ok && c.pass;
      out << (ok ? "selftest passed\n" : "selftest FAILED\n");
      return ok ? kExitOk : kExitContract;
    }
    err << app.help();
    return kExitUsage;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kExitContract;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace dereverb::cli
