// tests/tensor_test.cc

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

#include "dereverb/archive.h"
#include "dereverb/errors.h"
#include "dereverb/tensor.h"
#include "test_util.h"

using namespace dereverb;
using dereverb::testing::CheckGradients;
using dereverb::testing::MaxAbsDiff;
using dereverb::testing::RandomProjection;
using dereverb::testing::RandomTensor;

namespace {

// Brute-force oracles, independent of the im2col/gemm path.
std::vector<double> TripleLoopMatMul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a.at(i, p) * b.at(p, j);
  return c;
}

std::vector<double> NestedLoopConv2d(const Tensor& x, const Tensor& k, const Tensor& bias,
                                     Conv2dParams p) {
  const long cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const long cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const long ho = (h + 2 * long(p.pad_h) - kh) / long(p.stride_h) + 1;
  const long wo = (w + 2 * long(p.pad_w) - kw) / long(p.stride_w) + 1;
  std::vector<double> y(cout * ho * wo, 0.0);
  auto xv = x.data();
  auto kv = k.data();
  for (long co = 0; co < cout; ++co)
    for (long oh = 0; oh < ho; ++oh)
      for (long ow = 0; ow < wo; ++ow) {
        double acc = bias.defined() ? bias.data()[co] : 0.0;
        for (long ci = 0; ci < cin; ++ci)
          for (long i = 0; i < kh; ++i)
            for (long j = 0; j < kw; ++j) {
              const long ih = oh * long(p.stride_h) + i - long(p.pad_h);
              const long iw = ow * long(p.stride_w) + j - long(p.pad_w);
              if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
              acc += xv[(ci * h + ih) * w + iw] * kv[((co * cin + ci) * kh + i) * kw + j];
            }
        y[(co * ho + oh) * wo + ow] = acc;
      }
  return y;
}

}  // namespace

TEST_CASE("matmul: identity and hand-computed product") {
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor m = RandomTensor({3, 3}, 11);
  Tensor c = MatMul(eye, m);
  CHECK(MaxAbsDiff(c.data(), m.data()) == 0.0);

  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 1}, {1, 1});
  Tensor r = MatMul(a, b);
  CHECK(r.shape() == Shape{2, 1});
  CHECK(r.data()[0] == 3.0);
  CHECK(r.data()[1] == 7.0);
}

TEST_CASE("matmul: agrees with triple-loop oracle on random shapes") {
  Tensor a = RandomTensor({5, 4}, 1);
  Tensor b = RandomTensor({4, 6}, 2);
  CHECK(MaxAbsDiff(MatMul(a, b).data(), TripleLoopMatMul(a, b)) < 1e-12);

  std::mt19937_64 gen(3);
  std::uniform_int_distribution<std::size_t> size(1, 90);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = size(gen), k = size(gen), n = size(gen);
    Tensor x = RandomTensor({m, k}, 100 + trial);
    Tensor y = RandomTensor({k, n}, 300 + trial);
    REQUIRE(MaxAbsDiff(MatMul(x, y).data(), TripleLoopMatMul(x, y)) < 1e-12);
    Tensor yt = Transpose(y);
    REQUIRE(MaxAbsDiff(MatMulTransposed(x, yt).data(), TripleLoopMatMul(x, y)) < 1e-12);
  }
}

TEST_CASE("matmul: shape mismatch names both shapes") {
  Tensor a = Tensor::Zeros({2, 3});
  Tensor b = Tensor::Zeros({4, 5});
  try {
    MatMul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x5]") != std::string::npos);
  }
}

TEST_CASE("conv2d: frequency-axis geometry 240 -> 47") {
  Tensor x = RandomTensor({1, 9, 240}, 5);
  Tensor k = RandomTensor({64, 1, 11, 10}, 6);
  Tensor y = Conv2d(x, k, Tensor(), {1, 5, 5, 0});
  CHECK(y.shape() == Shape{64, 9, 47});
}

TEST_CASE("conv2d: 1x1 kernel is pointwise scaling") {
  Tensor x = RandomTensor({1, 4, 5}, 7);
  Tensor k({1, 1, 1, 1}, {2.5});
  Tensor y = Conv2d(x, k, Tensor(), {});
  REQUIRE(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == 2.5 * x.data()[i]);
}

TEST_CASE("conv2d: agrees with nested-loop oracle") {
  Tensor x = RandomTensor({1, 8, 12}, 8);
  Tensor k = RandomTensor({2, 1, 3, 3}, 9);
  Tensor b = RandomTensor({2}, 10);
  CHECK(MaxAbsDiff(Conv2d(x, k, b, {}).data(), NestedLoopConv2d(x, k, b, {})) < 1e-12);

  std::mt19937_64 gen(11);
  std::uniform_int_distribution<std::size_t> small(1, 4), len(3, 14), ks(1, 4), st(1, 3),
      pd(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t cin = small(gen), cout = small(gen), h = len(gen), w = len(gen);
    const std::size_t kh = std::min(ks(gen), h), kw = std::min(ks(gen), w);
    Conv2dParams p{st(gen), st(gen), pd(gen), pd(gen)};
    Tensor xi = RandomTensor({cin, h, w}, 1000 + trial);
    Tensor ki = RandomTensor({cout, cin, kh, kw}, 2000 + trial);
    Tensor bi = trial % 2 ? RandomTensor({cout}, 3000 + trial) : Tensor();
    REQUIRE(MaxAbsDiff(Conv2d(xi, ki, bi, p).data(), NestedLoopConv2d(xi, ki, bi, p)) <
            1e-12);
  }
}

TEST_CASE("conv2d: kernel larger than padded input is rejected") {
  Tensor x = Tensor::Zeros({1, 3, 3});
  Tensor k = Tensor::Zeros({1, 1, 5, 2});
  CHECK_THROWS_AS(Conv2d(x, k, Tensor(), {1, 1, 0, 0}), DimensionError);
  CHECK_NOTHROW(Conv2d(x, k, Tensor(), {1, 1, 1, 0}));
}

TEST_CASE("conv1d: length preserving, delta kernel, oracle") {
  Tensor x = RandomTensor({3, 100}, 12);
  Tensor k = RandomTensor({4, 3, 11}, 13);
  CHECK(Conv1d(x, k, Tensor(), 1, 5).shape() == Shape{4, 100});

  Tensor delta({1, 1, 1}, {1.0});
  Tensor x1 = RandomTensor({1, 17}, 14);
  CHECK(MaxAbsDiff(Conv1d(x1, delta, Tensor(), 1, 0).data(), x1.data()) == 0.0);

  std::mt19937_64 gen(15);
  std::uniform_int_distribution<std::size_t> small(1, 5), len(5, 30), ks(1, 5), st(1, 3),
      pd(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t cin = small(gen), cout = small(gen), l = len(gen);
    const std::size_t kk = ks(gen), s = st(gen), p = pd(gen);
    Tensor xi = RandomTensor({cin, l}, 4000 + trial);
    Tensor ki = RandomTensor({cout, cin, kk}, 5000 + trial);
    Tensor bi = RandomTensor({cout}, 6000 + trial);
    Tensor y = Conv1d(xi, ki, bi, s, p);
    REQUIRE(y.dim(1) == (l + 2 * p - kk) / s + 1);
    auto oracle = NestedLoopConv2d(Reshape(xi, {cin, 1, l}), Reshape(ki, {cout, cin, 1, kk}),
                                   bi, {1, s, 0, p});
    REQUIRE(MaxAbsDiff(y.data(), oracle) < 1e-12);
  }
}

TEST_CASE("elementwise: values and domain") {
  Tensor x({3}, {-1, 0, 2});
  Tensor r = Relu(x);
  CHECK(r.data()[0] == 0.0);
  CHECK(r.data()[1] == 0.0);
  CHECK(r.data()[2] == 2.0);
  CHECK(Sigmoid(Tensor({1}, {0.0})).data()[0] == 0.5);
  CHECK_THROWS_AS(Log(Tensor({2}, {1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(Log(Tensor({1}, {-3.0})), DomainError);
  CHECK(Exp(Tensor({1}, {0.0})).data()[0] == 1.0);
}

TEST_CASE("elementwise: tanh derivative at 0.3 vs central difference") {
  Tensor x({1}, {0.3}, true);
  {
    Tape tape;
    tape.Backward(Sum(Tanh(x)));
  }
  const double h = 1e-6;
  const double fd = (std::tanh(0.3 + h) - std::tanh(0.3 - h)) / (2 * h);
  CHECK(std::abs(x.grad()[0] - fd) < 1e-7);
}

TEST_CASE("elementwise: gradient checks for every unary and binary op") {
  for (UnaryFn fn : {UnaryFn::kRelu, UnaryFn::kTanh, UnaryFn::kSigmoid, UnaryFn::kExp,
                     UnaryFn::kLog}) {
    // positive inputs away from the relu kink keep the check smooth
    Tensor x = RandomTensor({4, 5}, 20, true, 0.1, 2.0);
    auto r = CheckGradients([&] { return RandomProjection(Apply(x, fn), 21); }, {x});
    CHECK(r.max_rel_error < 1e-4);
  }
  Tensor a = RandomTensor({3, 4}, 22, true);
  Tensor b = RandomTensor({3, 4}, 23, true);
  Tensor bias = RandomTensor({4}, 24, true);
  auto r = CheckGradients(
      [&] {
        Tensor y = Add(Mul(a, b), Sub(Scale(a, 0.7), b));
        return RandomProjection(AddRowBroadcast(y, bias), 25);
      },
      {a, b, bias});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("layer_norm: constant input, moments, gradient") {
  Tensor gain = Tensor::Full({6}, 1.0);
  Tensor bias = Tensor::Zeros({6});
  Tensor c = Tensor::Full({2, 6}, 3.5);
  CHECK(MaxAbsDiff(LayerNorm(c, gain, bias).data(), std::vector<double>(12, 0.0)) == 0.0);

  Tensor x = RandomTensor({4, 64}, 30, false, -3, 5);
  Tensor g1 = Tensor::Full({64}, 1.0), b0 = Tensor::Zeros({64});
  Tensor y = LayerNorm(x, g1, b0, 1e-5);
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0, var = 0;
    for (std::size_t j = 0; j < 64; ++j) mean += y.at(r, j);
    mean /= 64;
    for (std::size_t j = 0; j < 64; ++j) var += (y.at(r, j) - mean) * (y.at(r, j) - mean);
    var /= 64;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }

  Tensor xg = RandomTensor({3, 7}, 31, true);
  Tensor gg = RandomTensor({7}, 32, true, 0.5, 1.5);
  Tensor bg = RandomTensor({7}, 33, true);
  auto r = CheckGradients([&] { return RandomProjection(LayerNorm(xg, gg, bg), 34); },
                          {xg, gg, bg});
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("softmax: uniform, shift invariance, rows sum to one, gradient") {
  Tensor z = Softmax(Tensor({1, 3}, {0, 0, 0}), 1);
  for (double v : z.data()) CHECK(std::abs(v - 1.0 / 3.0) < 1e-15);

  Tensor x = RandomTensor({4, 9}, 40, false, -5, 5);
  Tensor shifted = AddRowBroadcast(x, Tensor::Full({9}, 123.0));
  CHECK(MaxAbsDiff(Softmax(x, 1).data(), Softmax(shifted, 1).data()) < 1e-12);
  Tensor s = Softmax(x, 1);
  for (std::size_t r = 0; r < 4; ++r) {
    double sum = 0;
    for (std::size_t j = 0; j < 9; ++j) {
      CHECK(s.at(r, j) > 0);
      sum += s.at(r, j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  Tensor s0 = Softmax(x, 0);
  for (std::size_t j = 0; j < 9; ++j) {
    double sum = 0;
    for (std::size_t r = 0; r < 4; ++r) sum += s0.at(r, j);
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }

  Tensor xg = RandomTensor({3, 5}, 41, true);
  for (std::size_t axis : {0u, 1u}) {
    auto r = CheckGradients([&] { return RandomProjection(Softmax(xg, axis), 42); }, {xg});
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("conv and matmul gradients vs finite differences") {
  Tensor x = RandomTensor({2, 7, 9}, 50, true);
  Tensor k = RandomTensor({3, 2, 3, 4}, 51, true);
  Tensor b = RandomTensor({3}, 52, true);
  auto r = CheckGradients(
      [&] { return RandomProjection(Conv2d(x, k, b, {2, 1, 1, 2}), 53); }, {x, k, b});
  CHECK(r.max_rel_error < 1e-4);

  Tensor x1 = RandomTensor({4, 10}, 54, true);
  Tensor k1 = RandomTensor({3, 4, 5}, 55, true);
  auto r1 = CheckGradients(
      [&] { return RandomProjection(Conv1d(x1, k1, Tensor(), 1, 2), 56); }, {x1, k1});
  CHECK(r1.max_rel_error < 1e-4);

  Tensor a = RandomTensor({4, 6}, 57, true);
  Tensor w = RandomTensor({6, 3}, 58, true);
  Tensor wt = RandomTensor({5, 6}, 59, true);
  auto r2 = CheckGradients(
      [&] {
        return Add(RandomProjection(MatMul(a, w), 60),
                   RandomProjection(MatMulTransposed(a, wt), 61));
      },
      {a, w, wt});
  CHECK(r2.max_rel_error < 1e-4);
}

TEST_CASE("shape ops: gradients and values") {
  Tensor x = RandomTensor({2, 3, 4}, 70, true);
  auto r = CheckGradients(
      [&] {
        Tensor p = Permute(x, {1, 0, 2});  // 3x2x4
        Tensor m = Reshape(p, {3, 8});
        Tensor t = Transpose(m);  // 8x3
        Tensor a = SliceRows(t, 1, 6);
        Tensor c = SliceCols(a, 1, 3);
        Tensor cat = ConcatCols({c, ReverseRows(c)});
        Tensor rows = ConcatRows({cat, SliceRows(cat, 0, 2)});
        return RandomProjection(rows, 71);
      },
      {x});
  CHECK(r.max_rel_error < 1e-6);

  Tensor v({2, 3, 2}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  Tensor p = Permute(v, {1, 0, 2});
  CHECK(p.shape() == Shape{3, 2, 2});
  // p[i][j][k] = v[j][i][k]
  CHECK(p.data()[0 * 4 + 1 * 2 + 1] == v.data()[1 * 6 + 0 * 2 + 1]);
  CHECK(p.data()[2 * 4 + 0 * 2 + 0] == v.data()[0 * 6 + 2 * 2 + 0]);
}

TEST_CASE("backward: simple closed forms and accumulation") {
  Tensor x = RandomTensor({5}, 80, true);
  {
    Tape tape;
    tape.Backward(Sum(x));
  }
  for (double g : x.grad()) CHECK(g == 1.0);

  x.zero_grad();
  {
    Tape tape;
    tape.Backward(Sum(Mul(x, x)));
  }
  for (std::size_t i = 0; i < 5; ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x.data()[i]));

  // x used twice in the graph plus a second backward pass: gradients add up.
  x.zero_grad();
  {
    Tape tape;
    tape.Backward(Add(Sum(x), Sum(Scale(x, 3.0))));
  }
  for (double g : x.grad()) CHECK(g == doctest::Approx(4.0));
  {
    Tape tape;
    tape.Backward(Sum(x));
  }
  for (double g : x.grad()) CHECK(g == doctest::Approx(5.0));
}

TEST_CASE("backward: contract errors") {
  Tensor x = RandomTensor({3}, 81, true);
  Tape tape;
  Tensor y = Scale(x, 2.0);
  CHECK_THROWS_AS(tape.Backward(y), ContractError);
}

TEST_CASE("backward: operations outside a tape are not recorded") {
  Tensor x = RandomTensor({3}, 82, true);
  Tensor y = Scale(x, 2.0);
  CHECK_FALSE(y.requires_grad());
  Tape tape;
  Tensor z = Scale(x, 2.0);
  CHECK(z.requires_grad());
  CHECK(tape.size() == 1);
}

TEST_CASE("determinism: identical inputs give bit-identical outputs and gradients") {
  auto run = [] {
    Tensor x = InitNormal({6, 8}, 0.0, 1.0, 90);
    Tensor w = InitNormal({8, 8}, 0.0, 0.3, 91);
    Tensor g = Tensor::Full({8}, 1.0, true), b = Tensor::Zeros({8}, true);
    Tape tape;
    Tensor y = Softmax(LayerNorm(Tanh(MatMul(x, w)), g, b), 1);
    Tensor loss = RandomProjection(y, 92);
    tape.Backward(loss);
    std::vector<double> out(w.grad().begin(), w.grad().end());
    out.insert(out.end(), y.data().begin(), y.data().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("init_normal: degenerate std, determinism, statistics") {
  CHECK_THROWS_AS(InitNormal({4}, 0.0, 0.0, 1), DomainError);
  CHECK_THROWS_AS(InitNormal({4}, 0.0, -1.0, 1), DomainError);
  Tensor a = InitNormal({100}, 0.0, 1.0, 42);
  Tensor b = InitNormal({100}, 0.0, 1.0, 42);
  CHECK(std::vector<double>(a.data().begin(), a.data().end()) ==
        std::vector<double>(b.data().begin(), b.data().end()));

  Tensor big = InitNormal({1000000}, 0.0, 0.02, 42);
  double mean = 0;
  for (double v : big.data()) mean += v;
  mean /= 1e6;
  double var = 0;
  for (double v : big.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / 1e6);
  CHECK(sd >= 0.0198);
  CHECK(sd <= 0.0202);
  CHECK(std::abs(mean) < 0.0002);
}

TEST_CASE("archive: tensors survive a write/read cycle bit-exactly") {
  const auto path = std::filesystem::temp_directory_path() / "dereverb_archive_test.bin";
  TensorArchive ar;
  ar.meta["note"] = "unit";
  ar.Add("a", RandomTensor({3, 4}, 100, false, -1e6, 1e6));
  ar.Add("b", Tensor({}, {-0.0}));
  ar.Add("c", RandomTensor({2, 1, 5}, 101));
  ar.Add("empty", Tensor({0, 4}, {}));
  WriteArchive(path, ar);
  TensorArchive back = ReadArchive(path);
  CHECK(back.meta["note"] == "unit");
  REQUIRE(back.tensors.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.tensors[i].first == ar.tensors[i].first);
    CHECK(back.tensors[i].second.shape() == ar.tensors[i].second.shape());
    CHECK(std::memcmp(back.tensors[i].second.data().data(), ar.tensors[i].second.data().data(),
                      8 * ar.tensors[i].second.numel()) == 0);
  }
  CHECK_THROWS_AS(back.Get("missing"), IoError);

  {
    std::ofstream os(path, std::ios::trunc);
    os << "{\"format\":\"other\"}\n";
  }
  CHECK_THROWS_AS(ReadArchive(path), IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(ReadArchive(path), IoError);
}
