// tests/train_test.cc

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
#include <limits>
#include <sstream>

#include "dereverb/errors.h"
#include "dereverb/train.h"
#include "dereverb/wav.h"
#include "test_util.h"

namespace dereverb {
namespace {

namespace fs = std::filesystem;
using testing::RandomTensor;

std::string Slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TEST_CASE("l2 loss") {
  const Tensor a = RandomTensor({7, 240}, 1);
  CHECK(L2Loss(a, a).item() == 0.0);
  std::vector<double> shifted(a.data().begin(), a.data().end());
  for (double& v : shifted) v += 1.0;
  CHECK(L2Loss(Tensor({7, 240}, shifted), a).item() == doctest::Approx(1.0).epsilon(1e-14));
  const Tensor b = RandomTensor({7, 240}, 2);
  double acc = 0;
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 240; ++c) acc += (a.at(r, c) - b.at(r, c)) * (a.at(r, c) - b.at(r, c));
  CHECK(std::abs(L2Loss(a, b).item() - acc / (7 * 240)) < 1e-12);
  CHECK(L2Loss(a, b).item() >= 0);
  CHECK_THROWS_AS(L2Loss(a, RandomTensor({6, 240}, 3)), DimensionError);
}

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  CHECK(LrAt(0, c) == 0.0);
  CHECK(LrAt(750, c) == 3e-4);
  CHECK(LrAt(75000, c) == 0.0);
  CHECK(LrAt(375, c) == doctest::Approx(1.5e-4).epsilon(1e-12));
  // Halfway through the decay.
  CHECK(LrAt(750 + (75000 - 750) / 2, c) == doctest::Approx(1.5e-4).epsilon(1e-12));
  double prev = -1;
  for (std::size_t s = 0; s <= 750; s += 10) {
    CHECK(LrAt(s, c) > prev);
    prev = LrAt(s, c);
  }
  for (std::size_t s = 760; s <= 75000; s += 10) {
    CHECK(LrAt(s, c) < prev);
    CHECK(LrAt(s, c) <= c.peak_lr);
    prev = LrAt(s, c);
  }
  CHECK_THROWS_AS(LrAt(75001, c), ContractError);
  c.warmup_frac = 1.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
}

ParamStore OneParam(double value) {
  ParamStore p;
  p.Add("w", Tensor({1}, {value}, true));
  return p;
}

TEST_CASE("adam") {
  TrainConfig cfg;
  {
    const ParamStore p = OneParam(2.0);
    auto st = AdamState::For(p);
    AdamStep(p, st, 0.1, cfg);
    CHECK(p.Get("w").item() == 2.0);
    CHECK(st.m[0][0] == 0.0);
    CHECK(st.step == 1);
    st.m[0][0] = 0.5;
    st.v[0][0] = 0.25;
    Tensor w = p.Get("w");
    w.zero_grad();
    AdamStep(p, st, 0.0, cfg);
    CHECK(st.m[0][0] == 0.9 * 0.5);
    CHECK(st.v[0][0] == 0.999 * 0.25);
  }
  {
    const ParamStore p = OneParam(2.0);
    auto st = AdamState::For(p);
    p.Get("w").mutable_grad()[0] = 1.0;
    AdamStep(p, st, 0.1, cfg);
    // m̂ = 1 and v̂ = 1 after bias correction.
    CHECK(std::abs(p.Get("w").item() - (2.0 - 0.1 / (1.0 + 1e-8))) < 1e-15);
  }
  {
    ParamStore p;
    p.Add("ok", Tensor({2}, {1.0, 2.0}, true));
    p.Add("bad", Tensor({2}, {3.0, 4.0}, true));
    p.Get("ok").mutable_grad()[0] = 1.0;
    p.Get("bad").mutable_grad()[1] = std::numeric_limits<double>::infinity();
    auto st = AdamState::For(p);
    try {
      AdamStep(p, st, 0.1, cfg);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("bad") != std::string::npos);
    }
    CHECK(p.Get("ok").data()[0] == 1.0);
    CHECK(st.step == 0);
  }
}

TEST_CASE("gradient clipping") {
  ParamStore p;
  p.Add("a", Tensor({2}, {0.0, 0.0}, true));
  p.Add("b", Tensor({1}, {0.0}, true));
  p.Get("a").mutable_grad()[0] = 3.0;
  p.Get("a").mutable_grad()[1] = 4.0;
  p.Get("b").mutable_grad()[0] = 12.0;
  CHECK(ClipGradNorm(p, 5.0) == doctest::Approx(13.0));
  CHECK(p.Get("a").grad()[0] == doctest::Approx(15.0 / 13.0));
  CHECK(p.Get("b").grad()[0] == doctest::Approx(60.0 / 13.0));
  CHECK(ClipGradNorm(p, 5.0) == doctest::Approx(5.0));
  CHECK(p.Get("b").grad()[0] == doctest::Approx(60.0 / 13.0));
}

StackedFrames Ramp(std::size_t t) {
  LogMelSpectrogram m;
  m.frames = t;
  m.bins = 80;
  for (std::size_t i = 0; i < t * 80; ++i) m.data.push_back(1.0 + static_cast<double>(i));
  return StackFrames(m);
}

TEST_CASE("consecutive masking") {
  const auto d = Ramp(31);  // 11 steps, last group padded twice
  const auto one = MaskConsecutive(d, 13, 0);
  CHECK(one.raw_frames == std::vector<std::size_t>{13});
  std::size_t zeros = 0;
  for (double v : one.frames.data) zeros += v == 0.0;
  CHECK(zeros == 80);

  const auto mid = MaskConsecutive(d, 15);
  CHECK(mid.raw_frames.size() == 9);
  const auto back = UnstackFrames(mid.frames);
  const auto orig = UnstackFrames(d);
  for (std::size_t t = 0; t < 31; ++t) {
    for (std::size_t b = 0; b < 80; ++b) {
      if (t >= 11 && t <= 19) CHECK(back.at(t, b) == 0.0);
      else CHECK(back.at(t, b) == orig.at(t, b));
    }
  }

  CHECK(MaskConsecutive(d, 2).raw_frames == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  const auto end = MaskConsecutive(d, 30);
  CHECK(end.raw_frames.front() == 26);
  CHECK(end.raw_frames.back() == 30);
  // The padding copies of frame 30 must not leak it.
  for (std::size_t c = 0; c < 240; ++c) CHECK(end.frames.data[10 * 240 + c] == 0.0);
  CHECK_THROWS_AS(MaskConsecutive(d, 31), ContractError);
}

TrainingData TinyData() {
  std::vector<Waveform> clean, reverb;
  std::vector<LogMelSpectrogram> in, tg;
  for (int i = 0; i < 3; ++i) {
    clean.push_back(GenerateSpeechLike({.duration = 0.6}, 40 + i));
    RoomSpec spec;
    spec.t60 = 0.3;
    reverb.push_back(Convolve(clean.back(), ImageMethodRir(spec)));
    in.push_back(ExtractLogMel(reverb.back()));
    tg.push_back(ExtractLogMel(clean.back()));
  }
  TrainingData d;
  d.input_stats = FitNormStats(std::span(in).first(2));
  d.target_stats = FitNormStats(std::span(tg).first(2));
  for (int i = 0; i < 3; ++i) {
    auto u = MakeUtterance("u" + std::to_string(i), 0.3, reverb[i], clean[i], d.input_stats,
                           d.target_stats);
    (i < 2 ? d.train : d.valid).push_back(std::move(u));
  }
  return d;
}

ModelConfig TinyModel() {
  auto m = ModelConfig::Reduced(PreseqKind::kDef, EncoderKind::kBert);
  m.p_dim = 32;
  m.a_num = 2;
  m.f_dim = 64;
  return m;
}

TrainConfig TinyTrain() {
  TrainConfig t;
  t.total_steps = 12;
  t.warmup_frac = 0.25;
  t.peak_lr = 1e-3;
  t.batch_size = 2;
  t.max_steps_per_batch = 6;
  t.valid_every = 5;
  t.checkpoint_every = 4;
  t.mask_half_width = 2;
  t.seed = 9;
  return t;
}

TEST_CASE("training loop") {
  const fs::path root = fs::temp_directory_path() / "dereverb_train_test";
  fs::remove_all(root);
  const auto data = TinyData();
  const auto mcfg = TinyModel();
  const auto tcfg = TinyTrain();

  TrainOptions opt;
  opt.out_dir = root / "a";
  const auto a = TrainLoop(data, mcfg, tcfg, opt);
  REQUIRE(a.records.size() == 12);
  CHECK(fs::exists(root / "a" / "best.ckpt"));
  CHECK(a.records[4].valid_loss.has_value());
  CHECK_FALSE(a.records[5].valid_loss.has_value());
  CHECK(a.records[11].valid_loss.has_value());

  // The CSV carries exactly lr_at for every step.
  std::ifstream csv(root / "a" / "loss.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "step,lr,train_loss,valid_loss");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string step, lr;
    std::getline(ss, step, ',');
    std::getline(ss, lr, ',');
    CHECK(std::stod(lr) == LrAt(std::stoul(step), tcfg));
    ++rows;
  }
  CHECK(rows == 12);

  opt.out_dir = root / "b";
  TrainLoop(data, mcfg, tcfg, opt);
  CHECK(Slurp(root / "a" / "last.ckpt") == Slurp(root / "b" / "last.ckpt"));
  CHECK(Slurp(root / "a" / "loss.csv") == Slurp(root / "b" / "loss.csv"));

  // Interrupted after step 6, resumed from the step-4 checkpoint.
  opt.out_dir = root / "c";
  opt.stop_after = 6;
  TrainLoop(data, mcfg, tcfg, opt);
  const auto ck4 = root / "c" / "step4.ckpt";
  TrainOptions first4 = opt;
  first4.out_dir = root / "d";
  first4.stop_after = 4;
  TrainLoop(data, mcfg, tcfg, first4);
  fs::copy_file(root / "d" / "last.ckpt", ck4);
  opt.stop_after = 0;
  opt.resume = ck4;
  const auto resumed = TrainLoop(data, mcfg, tcfg, opt);
  REQUIRE(resumed.records.size() == 8);
  CHECK(resumed.records[0].step == 5);
  CHECK(resumed.records[0].train_loss == a.records[4].train_loss);
  CHECK(Slurp(root / "a" / "last.ckpt") == Slurp(root / "c" / "last.ckpt"));
  CHECK(Slurp(root / "a" / "loss.csv") == Slurp(root / "c" / "loss.csv"));

  auto other = tcfg;
  other.seed = 10;
  CHECK_THROWS_AS(TrainLoop(data, mcfg, other, opt), ConfigError);

  TrainOptions stop;
  stop.out_dir = root / "e";
  stop.stop_when = [](const StepRecord& r) { return r.step == 3; };
  CHECK(TrainLoop(data, mcfg, tcfg, stop).last_step == 3);
  CHECK(LoadCheckpoint(root / "e" / "last.ckpt").step == 3);

  TrainingData empty = data;
  empty.train.clear();
  CHECK_THROWS_AS(TrainLoop(empty, mcfg, tcfg, stop), ContractError);
  fs::remove_all(root);
}

TEST_CASE("checkpoint round trip") {
  const fs::path path = fs::temp_directory_path() / "dereverb_ckpt_test.ckpt";
  Checkpoint c;
  c.model = TinyModel();
  c.train = TinyTrain();
  c.params = InitParams(c.model);
  c.adam = AdamState::For(c.params);
  c.adam.m[3][1] = 0.125;
  c.adam.v[2][0] = 1.0 / 3.0;
  c.adam.step = 17;
  c.step = 17;
  c.best_valid = 0.1 + 0.2;
  c.input_stats = {std::vector<double>(80, -1.5), std::vector<double>(80, 2.0 / 3.0)};
  c.target_stats = {std::vector<double>(80, 0.25), std::vector<double>(80, 1e-9)};
  SaveCheckpoint(path, c);
  const auto r = LoadCheckpoint(path);
  CHECK(r.model.ToJson() == c.model.ToJson());
  CHECK(r.train.ToJson() == c.train.ToJson());
  CHECK(r.step == 17);
  CHECK(r.adam.step == 17);
  CHECK(*r.best_valid == *c.best_valid);
  CHECK(r.adam.m == c.adam.m);
  CHECK(r.adam.v == c.adam.v);
  CHECK(r.input_stats.stddev == c.input_stats.stddev);
  CHECK(r.target_stats.stddev == c.target_stats.stddev);
  for (std::size_t i = 0; i < c.params.entries().size(); ++i) {
    const auto& x = c.params.entries()[i].second;
    const auto& y = r.params.entries()[i].second;
    CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
  }
  std::ofstream(path) << "not a checkpoint\n";
  CHECK_THROWS_AS(LoadCheckpoint(path), IoError);
  fs::remove(path);
}

TEST_CASE("training data from a manifest") {
  const fs::path root = fs::temp_directory_path() / "dereverb_prep_test";
  fs::remove_all(root);
  const auto clean_dir = GenerateCleanCorpus(root, 10, 3, 0.5, 0.7);
  DatasetOptions opt;
  opt.t60s = {0.3};
  opt.rirs_per_t60 = 2;
  opt.valid_fraction = 0.2;
  opt.test_fraction = 0.2;
  const auto m = BuildDataset(clean_dir, root / "data", opt);
  const auto data = PrepareTrainingData(m);
  const auto train = m.Select(Split::kTrain);
  REQUIRE(data.train.size() == train.size());
  CHECK(data.valid.size() == m.Select(Split::kValid).size());
  std::vector<LogMelSpectrogram> in;
  for (const auto& e : train) in.push_back(ExtractLogMel(ReadWav(m.Resolve(e.reverb_path))));
  const auto stats = FitNormStats(in);
  for (std::size_t b = 0; b < 80; ++b) {
    CHECK(std::abs(stats.mean[b] - data.input_stats.mean[b]) < 1e-12);
    CHECK(std::abs(stats.stddev[b] - data.input_stats.stddev[b]) < 1e-12);
  }
  DatasetManifest none = m;
  none.entries.clear();
  CHECK_THROWS_AS(PrepareTrainingData(none), ContractError);
  fs::remove_all(root);
}

}  // namespace
}  // namespace dereverb
