// include/dereverb/eval.h

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

#ifndef DEREVERB_EVAL_H_
#define DEREVERB_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dereverb/dsp.h"
#include "dereverb/metrics.h"
#include "dereverb/model.h"
#include "dereverb/train.h"
#include "dereverb/wpe.h"

namespace dereverb {

// Checkpoint -> waveform pipeline: log-Mel, normalize, model, denormalize,
// unstack, pseudo-inverse mel, Griffin-Lim.
class Enhancer {
 public:
  explicit Enhancer(const Checkpoint& ckpt, std::size_t gl_iters = 32,
                    const FeatureConfig& features = {});

  // Denormalized predicted log-Mel, one frame per input frame.
  LogMelSpectrogram PredictLogMel(const Waveform& noisy) const;
  // Cut or zero-padded to the input length.
  Waveform Enhance(const Waveform& noisy) const;

  const DereverbModel& model() const { return model_; }

 private:
  DereverbModel model_;
  NormStats input_stats_;
  NormStats target_stats_;
  std::size_t gl_iters_;
  FeatureConfig features_;
};

// Mean squared difference of log-Mel features over the common frames.
double LogMelMse(const Waveform& est, const Waveform& ref, const FeatureConfig& features = {});

// ---------------------------------------------------------------------------
// Evaluation suite

struct SystemSpec {
  enum class Kind { kNoisy, kWpe, kCheckpoint };
  Kind kind = Kind::kNoisy;
  std::string name;  // NOISY, WPE or a label for the checkpoint
  std::filesystem::path checkpoint;

  // "noisy", "wpe" or "<label>=<checkpoint path>" / "<checkpoint path>".
  static SystemSpec Parse(const std::string& text);
};

struct EvalOptions {
  LsdOptions lsd{StftConfig{}, 80.0, 7600.0};
  WpeConfig wpe;
  std::size_t gl_iters = 32;
  std::size_t max_utterances = 0;  // 0 = whole test split
  std::size_t threads = 1;         // utterances scored concurrently
  // External scorer run as `<cmd> <ref.wav> <deg.wav>` on 16 kHz copies; the
  // last number it prints is recorded.
  std::optional<std::string> pesq_cmd;
  std::filesystem::path scratch_dir;  // where the scorer's wav pairs go
};

struct UtteranceMetrics {
  std::string utt_id;
  std::string system;
  double t60 = 0;
  double lsd_db = 0;
  double si_sdr_db = 0;
  double mel_mse = 0;
  std::optional<double> pesq;
};

struct SystemSummary {
  std::string system;
  double t60 = 0;
  std::size_t count = 0;
  double lsd_db = 0;
  double si_sdr_db = 0;
  double mel_mse = 0;
  std::optional<double> pesq;
  std::optional<std::size_t> params;
  double rtf = 0;  // processing time / audio time over the bucket
};

struct MetricReport {
  std::vector<UtteranceMetrics> utterances;
  std::vector<SystemSummary> summary;  // per T60 bucket, systems in request order

  const SystemSummary& Find(const std::string& system, double t60) const;
  std::string ToTable() const;
  void WriteSummaryCsv(const std::filesystem::path& path) const;
  void WriteUtteranceCsv(const std::filesystem::path& path) const;
};

// Every test-split entry is scored against its clean reference. Throws
// IoError listing all missing files before doing any work, ContractError on
// an empty test split.
MetricReport EvaluateSuite(const DatasetManifest& manifest, const std::vector<SystemSpec>& systems,
                           const EvalOptions& options = {});

// ---------------------------------------------------------------------------
// Attention and probes

struct AttentionDump {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t steps = 0;
  std::vector<Tensor> maps;              // per layer, heads x S x S
  std::vector<AttentionScores> scores;   // layer-major, one per head
};

// Throws UnsupportedError for BLSTM encoders.
AttentionDump ExportAttention(const DereverbModel& model, const StackedFrames& input);
void WriteAttentionDump(const std::filesystem::path& path, const AttentionDump& dump);

struct ProbeResult {
  double masked_mse = 0;      // over masked raw frames only
  double unmasked_delta = 0;  // mean |Δ| of predictions outside the mask
  std::size_t probes = 0;
};

// For every utterance, `centers` mask positions are drawn from `seed`; the
// same positions are used for any model given the same arguments.
ProbeResult MaskedRecoveryProbe(const DereverbModel& model, const std::vector<Utterance>& utts,
                                std::size_t centers, std::size_t half_width = 4,
                                std::uint64_t seed = 1);

}  // namespace dereverb

#endif  // DEREVERB_EVAL_H_
