// src/train.cc

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

#include "dereverb/train.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include "dereverb/archive.h"
#include "dereverb/errors.h"
#include "dereverb/wav.h"

namespace dereverb {

const MelFilterbank& FilterbankFor(const FeatureConfig& cfg) {
  using Key = std::tuple<std::size_t, std::size_t, double, double, double>;
  static std::mutex mu;
  static std::map<Key, MelFilterbank> cache;
  const Key key{cfg.num_mels, cfg.stft.num_bins(), cfg.sample_rate, cfg.f_min, cfg.f_max};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache
             .emplace(key, BuildMelFilterbank(cfg.num_mels, cfg.stft.num_bins(), cfg.sample_rate,
                                              cfg.f_min, cfg.f_max))
             .first;
  }
  return it->second;
}

LogMelSpectrogram ExtractLogMel(const Waveform& w, const FeatureConfig& cfg) {
  if (w.sample_rate != cfg.sample_rate)
    throw ContractError("features: expected " + std::to_string(cfg.sample_rate) +
                        " Hz audio, got " + std::to_string(w.sample_rate));
  return ToLogMel(Stft(w, cfg.stft), FilterbankFor(cfg));
}

namespace {

std::pair<LogMelSpectrogram, LogMelSpectrogram> PairFeatures(const Waveform& reverb,
                                                             const Waveform& clean,
                                                             const FeatureConfig& features) {
  auto in = ExtractLogMel(reverb, features);
  auto tg = ExtractLogMel(clean, features);
  const std::size_t t = std::min(in.frames, tg.frames);
  in.frames = tg.frames = t;
  in.data.resize(t * in.bins);
  tg.data.resize(t * tg.bins);
  return {std::move(in), std::move(tg)};
}

}  // namespace

Utterance MakeUtterance(std::string utt_id, double t60, const Waveform& reverb,
                        const Waveform& clean, const NormStats& input_stats,
                        const NormStats& target_stats, std::size_t d_rate,
                        const FeatureConfig& features) {
  auto [in, tg] = PairFeatures(reverb, clean, features);
  Utterance u;
  u.utt_id = std::move(utt_id);
  u.t60 = t60;
  u.input = StackFrames(Normalize(in, input_stats), d_rate);
  u.target = StackFrames(Normalize(tg, target_stats), d_rate);
  return u;
}

TrainingData PrepareTrainingData(const DatasetManifest& manifest, std::size_t d_rate,
                                 const FeatureConfig& features) {
  const auto train = manifest.Select(Split::kTrain);
  if (train.empty()) throw ContractError("training: manifest has no train entries");
  std::vector<LogMelSpectrogram> in, tg;
  for (const auto& e : train) {
    auto [a, b] = PairFeatures(ReadWav(manifest.Resolve(e.reverb_path)),
                               ReadWav(manifest.Resolve(e.clean_path)), features);
    in.push_back(std::move(a));
    tg.push_back(std::move(b));
  }
  TrainingData data;
  data.input_stats = FitNormStats(in);
  data.target_stats = FitNormStats(tg);
  for (std::size_t i = 0; i < train.size(); ++i) {
    Utterance u;
    u.utt_id = train[i].utt_id;
    u.t60 = train[i].t60;
    u.input = StackFrames(Normalize(in[i], data.input_stats), d_rate);
    u.target = StackFrames(Normalize(tg[i], data.target_stats), d_rate);
    data.train.push_back(std::move(u));
  }
  for (const auto& e : manifest.Select(Split::kValid)) {
    data.valid.push_back(MakeUtterance(e.utt_id, e.t60, ReadWav(manifest.Resolve(e.reverb_path)),
                                       ReadWav(manifest.Resolve(e.clean_path)), data.input_stats,
                                       data.target_stats, d_rate, features));
  }
  return data;
}

// ---------------------------------------------------------------------------

void TrainConfig::Validate() const {
  if (total_steps == 0) throw ConfigError("train: total_steps must be positive");
  if (!(warmup_frac > 0 && warmup_frac < 1)) throw ConfigError("train: warmup_frac must be in (0, 1)");
  if (!(peak_lr > 0)) throw ConfigError("train: peak_lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw ConfigError("train: Adam betas must be in [0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("train: adam_eps must be positive");
  if (!(clip_norm > 0)) throw ConfigError("train: clip_norm must be positive");
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (valid_every == 0 || checkpoint_every == 0)
    throw ConfigError("train: valid_every and checkpoint_every must be positive");
}

nlohmann::json TrainConfig::ToJson() const {
  nlohmann::json j = {{"total_steps", total_steps},
                      {"warmup_frac", warmup_frac},
                      {"peak_lr", peak_lr},
                      {"beta1", beta1},
                      {"beta2", beta2},
                      {"adam_eps", adam_eps},
                      {"clip_norm", clip_norm},
                      {"batch_size", batch_size},
                      {"max_steps_per_batch", max_steps_per_batch},
                      {"valid_every", valid_every},
                      {"checkpoint_every", checkpoint_every},
                      {"seed", seed}};
  j["mask_half_width"] = mask_half_width ? nlohmann::json(*mask_half_width) : nlohmann::json();
  return j;
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.total_steps = j.at("total_steps").get<std::size_t>();
    c.warmup_frac = j.at("warmup_frac").get<double>();
    c.peak_lr = j.at("peak_lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.clip_norm = j.at("clip_norm").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.max_steps_per_batch = j.at("max_steps_per_batch").get<std::size_t>();
    c.valid_every = j.at("valid_every").get<std::size_t>();
    c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("mask_half_width").is_null())
      c.mask_half_width = j.at("mask_half_width").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.Validate();
  return c;
}

double LrAt(std::size_t step, const TrainConfig& cfg) {
  if (step > cfg.total_steps)
    throw ContractError("lr_at: step " + std::to_string(step) + " beyond total_steps");
  const double total = static_cast<double>(cfg.total_steps);
  const double warm = cfg.warmup_frac * total;
  const double s = static_cast<double>(step);
  if (s <= warm) return cfg.peak_lr * s / warm;
  return cfg.peak_lr * (total - s) / (total - warm);
}

Tensor L2Loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape())
    throw DimensionError("l2_loss: shapes " + ShapeToString(prediction.shape()) + " and " +
                         ShapeToString(target.shape()) + " differ");
  return MeanSquaredError(prediction, target);
}

AdamState AdamState::For(const ParamStore& params) {
  AdamState s;
  for (const auto& [name, t] : params.entries()) {
    s.m.emplace_back(t.numel(), 0.0);
    s.v.emplace_back(t.numel(), 0.0);
  }
  return s;
}

void AdamStep(const ParamStore& params, AdamState& state, double lr, const TrainConfig& cfg) {
  const auto& entries = params.entries();
  if (state.m.size() != entries.size() || state.v.size() != entries.size())
    throw ContractError("adam: state does not match the parameter list");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Tensor& t = entries[i].second;
    if (state.m[i].size() != t.numel() || state.v[i].size() != t.numel())
      throw ContractError("adam: moment shape mismatch for " + entries[i].first);
    for (double g : t.grad()) {
      if (!std::isfinite(g))
        throw NumericError("adam: non-finite gradient in " + entries[i].first + " at step " +
                           std::to_string(state.step + 1));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor t = entries[i].second;
    auto data = t.mutable_data();
    const auto grad = t.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double g = grad.empty() ? 0.0 : grad[k];
      m[k] = cfg.beta1 * m[k] + (1 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1 - cfg.beta2) * g * g;
      data[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_eps);
    }
  }
}

double ClipGradNorm(const ParamStore& params, double max_norm) {
  double sq = 0;
  for (const auto& [name, t] : params.entries())
    for (double g : t.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& [name, t] : params.entries())
      if (t.has_grad())
        for (double& g : t.mutable_grad()) g *= s;
  }
  return norm;
}

MaskedFrames MaskConsecutive(const StackedFrames& d, std::size_t center, std::size_t half_width) {
  if (center >= d.orig_len)
    throw ContractError("mask: center " + std::to_string(center) + " outside 0.." +
                        std::to_string(d.orig_len - 1));
  MaskedFrames out{d, {}};
  const std::size_t lo = center >= half_width ? center - half_width : 0;
  const std::size_t hi = std::min(d.orig_len - 1, center + half_width);
  auto zero = [&](std::size_t raw) {
    double* row = &out.frames.data[(raw / d.d_rate) * d.dim + (raw % d.d_rate) * d.r_dim];
    std::fill_n(row, d.r_dim, 0.0);
  };
  for (std::size_t t = lo; t <= hi; ++t) {
    zero(t);
    out.raw_frames.push_back(t);
  }
  if (hi == d.orig_len - 1)
    for (std::size_t t = d.orig_len; t < d.steps * d.d_rate; ++t) zero(t);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointKind = "dereverb-checkpoint";

void AddStats(TensorArchive& ar, const std::string& prefix, const NormStats& s) {
  ar.Add(prefix + "/mean", Tensor({s.mean.size()}, s.mean));
  ar.Add(prefix + "/stddev", Tensor({s.stddev.size()}, s.stddev));
}

NormStats GetStats(const TensorArchive& ar, const std::string& prefix) {
  const auto m = ar.Get(prefix + "/mean").data();
  const auto s = ar.Get(prefix + "/stddev").data();
  return {{m.begin(), m.end()}, {s.begin(), s.end()}};
}

bool SameStats(const NormStats& a, const NormStats& b) {
  return a.mean == b.mean && a.stddev == b.stddev;
}

}  // namespace

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  TensorArchive ar;
  ar.meta = {{"kind", kCheckpointKind},
             {"model", ckpt.model.ToJson()},
             {"train", ckpt.train.ToJson()},
             {"step", ckpt.step},
             {"adam_step", ckpt.adam.step}};
  ar.meta["best_valid"] = ckpt.best_valid ? nlohmann::json(*ckpt.best_valid) : nlohmann::json();
  for (const auto& [name, t] : ckpt.params.entries()) ar.Add("param/" + name, t);
  const bool with_adam = !ckpt.adam.m.empty();
  ar.meta["has_adam"] = with_adam;
  if (with_adam) {
    const auto& e = ckpt.params.entries();
    for (std::size_t i = 0; i < e.size(); ++i) {
      ar.Add("adam/m/" + e[i].first, Tensor(e[i].second.shape(), ckpt.adam.m[i]));
      ar.Add("adam/v/" + e[i].first, Tensor(e[i].second.shape(), ckpt.adam.v[i]));
    }
  }
  AddStats(ar, "stats/input", ckpt.input_stats);
  AddStats(ar, "stats/target", ckpt.target_stats);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  WriteArchive(tmp, ar);
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  const TensorArchive ar = ReadArchive(path);
  if (ar.meta.value("kind", "") != kCheckpointKind)
    throw IoError("'" + path.string() + "' is not a dereverb checkpoint");
  Checkpoint c;
  try {
    c.model = ModelConfig::FromJson(ar.meta.at("model"));
    c.train = TrainConfig::FromJson(ar.meta.at("train"));
    c.step = ar.meta.at("step").get<std::size_t>();
    c.adam.step = ar.meta.at("adam_step").get<std::size_t>();
    if (!ar.meta.at("best_valid").is_null()) c.best_valid = ar.meta.at("best_valid").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path.string() + "': bad checkpoint metadata: " + e.what());
  }
  const bool with_adam = ar.meta.value("has_adam", false);
  const ParamStore layout = InitParams(c.model);
  for (const auto& [name, ref] : layout.entries()) {
    const Tensor& t = ar.Get("param/" + name);
    if (t.shape() != ref.shape())
      throw IoError("'" + path.string() + "': parameter " + name + " has shape " +
                    ShapeToString(t.shape()) + ", expected " + ShapeToString(ref.shape()));
    c.params.Add(name, Tensor(t.shape(), {t.data().begin(), t.data().end()}, true));
    if (with_adam) {
      const auto m = ar.Get("adam/m/" + name).data();
      const auto v = ar.Get("adam/v/" + name).data();
      c.adam.m.emplace_back(m.begin(), m.end());
      c.adam.v.emplace_back(v.begin(), v.end());
    }
  }
  c.input_stats = GetStats(ar, "stats/input");
  c.target_stats = GetStats(ar, "stats/target");
  return c;
}

DereverbModel ModelFromCheckpoint(const Checkpoint& ckpt) {
  return DereverbModel(ckpt.model, ckpt.params);
}

double EvaluateLoss(const DereverbModel& model, const std::vector<Utterance>& utterances) {
  if (utterances.empty()) throw ContractError("evaluate_loss: no utterances");
  double total = 0;
  for (const auto& u : utterances)
    total += L2Loss(model.Forward(u.input.ToTensor()).prediction, u.target.ToTensor()).item();
  return total / static_cast<double>(utterances.size());
}

namespace {

std::uint64_t StepSeed(std::uint64_t seed, std::size_t step) {
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ull + step + 0x632be59bd9b4e019ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

StackedFrames Crop(const StackedFrames& s, std::size_t offset, std::size_t len) {
  StackedFrames out = s;
  out.steps = len;
  out.orig_len = std::min(s.orig_len - offset * s.d_rate, len * s.d_rate);
  out.data.assign(s.data.begin() + offset * s.dim, s.data.begin() + (offset + len) * s.dim);
  return out;
}

struct Batch {
  std::vector<StackedFrames> inputs, targets;
};

// Composition depends only on (seed, step), so resumed runs see the same data.
Batch MakeBatch(const std::vector<Utterance>& train, const TrainConfig& cfg, std::size_t step) {
  std::mt19937_64 rng(StepSeed(cfg.seed, step));
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t b = std::min(cfg.batch_size, train.size());
  for (std::size_t i = 0; i < b; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(b);
  std::size_t len = train[idx[0]].input.steps;
  for (std::size_t i : idx) len = std::min(len, train[i].input.steps);
  if (cfg.max_steps_per_batch > 0) len = std::min(len, cfg.max_steps_per_batch);
  Batch batch;
  for (std::size_t i : idx) {
    const Utterance& u = train[i];
    std::uniform_int_distribution<std::size_t> off(0, u.input.steps - len);
    const std::size_t o = off(rng);
    StackedFrames in = Crop(u.input, o, len);
    if (cfg.mask_half_width) {
      std::uniform_int_distribution<std::size_t> c(0, in.orig_len - 1);
      in = MaskConsecutive(in, c(rng), *cfg.mask_half_width).frames;
    }
    batch.inputs.push_back(std::move(in));
    batch.targets.push_back(Crop(u.target, o, len));
  }
  return batch;
}

std::string FormatDouble(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Keeps the header and rows up to `step` of an existing loss curve.
void TruncateCsv(const std::filesystem::path& path, std::size_t step) {
  std::ifstream is(path);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(is, line)) {
    if (keep.empty() || std::stoull(line.substr(0, line.find(','))) <= step) keep.push_back(line);
  }
  is.close();
  std::ofstream os(path, std::ios::trunc);
  for (const auto& l : keep) os << l << '\n';
}

}  // namespace

TrainResult TrainLoop(const TrainingData& data, const ModelConfig& model_cfg,
                      const TrainConfig& cfg, const TrainOptions& options) {
  cfg.Validate();
  if (data.train.empty()) throw ContractError("train: no training utterances");
  std::filesystem::create_directories(options.out_dir);
  const auto csv_path = options.out_dir / "loss.csv";

  Checkpoint state;
  if (options.resume) {
    state = LoadCheckpoint(*options.resume);
    if (state.model.ToJson() != model_cfg.ToJson())
      throw ConfigError("train: resume checkpoint has a different model config");
    if (state.train.ToJson() != cfg.ToJson())
      throw ConfigError("train: resume checkpoint has a different train config");
    if (!SameStats(state.input_stats, data.input_stats) ||
        !SameStats(state.target_stats, data.target_stats))
      throw ConfigError("train: resume checkpoint was trained on different data statistics");
    if (state.adam.m.empty()) throw ConfigError("train: resume checkpoint carries no optimizer state");
  } else {
    state.model = model_cfg;
    state.train = cfg;
    state.params = InitParams(model_cfg);
    state.input_stats = data.input_stats;
    state.target_stats = data.target_stats;
    state.adam = AdamState::For(state.params);
  }
  const DereverbModel model(state.model, state.params);

  if (options.resume && std::filesystem::exists(csv_path)) {
    TruncateCsv(csv_path, state.step);
  } else {
    std::ofstream os(csv_path, std::ios::trunc);
    os << "step,lr,train_loss,valid_loss\n";
  }
  std::ofstream csv(csv_path, std::ios::app);
  if (!csv) throw IoError("cannot write '" + csv_path.string() + "'");

  const std::size_t end =
      options.stop_after > 0 ? std::min(options.stop_after, cfg.total_steps) : cfg.total_steps;
  TrainResult result;
  result.best_valid = state.best_valid;
  const double inv_b = 1.0 / static_cast<double>(std::min(cfg.batch_size, data.train.size()));
  for (std::size_t step = state.step + 1; step <= end; ++step) {
    StepRecord rec;
    rec.step = step;
    rec.lr = LrAt(step, cfg);
    const Batch batch = MakeBatch(data.train, cfg, step);
    for (const auto& [name, t] : state.params.entries()) t.zero_grad();
    {
      Tape tape;
      Tensor loss;
      for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
        const Tensor li = Scale(L2Loss(model.Forward(batch.inputs[i].ToTensor()).prediction,
                                       batch.targets[i].ToTensor()),
                                inv_b);
        loss = loss.defined() ? Add(loss, li) : li;
      }
      rec.train_loss = loss.item();
      if (!std::isfinite(rec.train_loss))
        throw NumericError("train: non-finite loss at step " + std::to_string(step));
      tape.Backward(loss);
    }
    ClipGradNorm(state.params, cfg.clip_norm);
    AdamStep(state.params, state.adam, rec.lr, cfg);
    state.step = step;

    const bool validate = !data.valid.empty() && (step % cfg.valid_every == 0 || step == end);
    if (validate) {
      rec.valid_loss = EvaluateLoss(model, data.valid);
      if (!result.best_valid || *rec.valid_loss < *result.best_valid) {
        result.best_valid = rec.valid_loss;
        state.best_valid = result.best_valid;
        SaveCheckpoint(options.out_dir / "best.ckpt", state);
      }
    }
    state.best_valid = result.best_valid;
    csv << step << ',' << FormatDouble(rec.lr) << ',' << FormatDouble(rec.train_loss) << ','
        << (rec.valid_loss ? FormatDouble(*rec.valid_loss) : "") << '\n';
    csv.flush();
    const bool stop = options.stop_when && options.stop_when(rec);
    if (step % cfg.checkpoint_every == 0 || step == end || stop)
      SaveCheckpoint(options.out_dir / "last.ckpt", state);
    if (options.on_step) options.on_step(rec);
    result.records.push_back(rec);
    if (stop) break;
  }
  result.last_step = state.step;
  return result;
}

}  // namespace dereverb
