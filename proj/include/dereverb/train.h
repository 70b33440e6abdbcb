// include/dereverb/train.h

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

#ifndef DEREVERB_TRAIN_H_
#define DEREVERB_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dereverb/dsp.h"
#include "dereverb/model.h"
#include "dereverb/room_sim.h"

namespace dereverb {

// ---------------------------------------------------------------------------
// Features

// STFT (1200/2048/300) and the 80-band 80–7600 Hz filterbank at 24 kHz.
struct FeatureConfig {
  StftConfig stft;
  std::size_t num_mels = 80;
  double sample_rate = 24000;
  double f_min = 80;
  double f_max = 7600;
};

// Cached filterbank for `cfg`.
const MelFilterbank& FilterbankFor(const FeatureConfig& cfg);
// Un-normalized log-Mel features. Throws ContractError on a sample-rate mismatch.
LogMelSpectrogram ExtractLogMel(const Waveform& w, const FeatureConfig& cfg = {});

struct Utterance {
  std::string utt_id;
  double t60 = 0;
  StackedFrames input;   // normalized reverberant features
  StackedFrames target;  // normalized clean features
};

struct TrainingData {
  NormStats input_stats;   // fitted on reverberant train features
  NormStats target_stats;  // fitted on clean train features
  std::vector<Utterance> train;
  std::vector<Utterance> valid;
};

Utterance MakeUtterance(std::string utt_id, double t60, const Waveform& reverb,
                        const Waveform& clean, const NormStats& input_stats,
                        const NormStats& target_stats, std::size_t d_rate = 3,
                        const FeatureConfig& features = {});

// Reads the train and valid entries of `manifest`; statistics come from the
// train split only. Throws ContractError when there is no train entry.
TrainingData PrepareTrainingData(const DatasetManifest& manifest, std::size_t d_rate = 3,
                                 const FeatureConfig& features = {});

// ---------------------------------------------------------------------------
// Optimization

struct TrainConfig {
  std::size_t total_steps = 75000;
  double warmup_frac = 0.01;
  double peak_lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  std::size_t batch_size = 4;
  // Crop length in stacked steps; 0 keeps the shortest utterance of the batch.
  std::size_t max_steps_per_batch = 0;
  std::size_t valid_every = 500;
  std::size_t checkpoint_every = 500;
  std::uint64_t seed = 1;
  // When set, every training input gets one block of 2·w+1 raw frames zeroed.
  std::optional<std::size_t> mask_half_width;

  void Validate() const;
  nlohmann::json ToJson() const;
  static TrainConfig FromJson(const nlohmann::json& j);
};

// Linear ramp 0 -> peak_lr over warmup_frac·total_steps, then linear decay to
// 0 at total_steps.
double LrAt(std::size_t step, const TrainConfig& cfg);

// Mean squared difference over all cells. Throws DimensionError on shape mismatch.
Tensor L2Loss(const Tensor& prediction, const Tensor& target);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  static AdamState For(const ParamStore& params);
};

// Bias-corrected Adam on the accumulated gradients of `params` (a missing
// gradient counts as zero). Throws NumericError naming the first tensor with
// a non-finite gradient, before anything is modified.
void AdamStep(const ParamStore& params, AdamState& state, double lr, const TrainConfig& cfg);

// Rescales all gradients so their global L2 norm is at most max_norm and
// returns the norm before clipping.
double ClipGradNorm(const ParamStore& params, double max_norm);

struct MaskedFrames {
  StackedFrames frames;
  std::vector<std::size_t> raw_frames;  // masked raw-frame indices
};

// Zeroes raw frames center-w .. center+w (clipped to the sequence), including
// any padding copies of a masked final frame. Zero is the corpus mean in
// normalized space.
MaskedFrames MaskConsecutive(const StackedFrames& d, std::size_t center,
                             std::size_t half_width = 4);

// ---------------------------------------------------------------------------
// Checkpoints and the training loop

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  ParamStore params;
  NormStats input_stats;
  NormStats target_stats;
  AdamState adam;
  std::size_t step = 0;
  std::optional<double> best_valid;
};

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);
DereverbModel ModelFromCheckpoint(const Checkpoint& ckpt);

struct StepRecord {
  std::size_t step = 0;
  double lr = 0;
  double train_loss = 0;
  std::optional<double> valid_loss;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // last.ckpt, best.ckpt and loss.csv go here
  std::optional<std::filesystem::path> resume;
  std::size_t stop_after = 0;  // stop (and checkpoint) after this step; 0 runs to the end
  std::function<void(const StepRecord&)> on_step;
  // Checked after every step; returning true checkpoints and stops.
  std::function<bool(const StepRecord&)> stop_when;
};

struct TrainResult {
  std::vector<StepRecord> records;
  std::size_t last_step = 0;
  std::optional<double> best_valid;
};

// Mean per-utterance loss over full sequences.
double EvaluateLoss(const DereverbModel& model, const std::vector<Utterance>& utterances);

TrainResult TrainLoop(const TrainingData& data, const ModelConfig& model_cfg,
                      const TrainConfig& cfg, const TrainOptions& options);

}  // namespace dereverb

#endif  // DEREVERB_TRAIN_H_
