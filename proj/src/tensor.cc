// src/tensor.cc

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

#include "dereverb/tensor.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "dereverb/errors.h"
#include "gemm.h"

namespace dereverb {

using internal::GemmAccumulate;
using internal::TransposeInto;

std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<internal::TensorNode>()) {
  if (NumElements(shape) != data.size()) {
    throw DimensionError("tensor shape " + ShapeToString(shape) + " holds " +
                         std::to_string(NumElements(shape)) +
                         " elements but data has " +
                         std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::Scalar(double value) { return Tensor({}, {value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + ShapeToString(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + ShapeToString(shape()));
  }
  return node_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return node_->data[row * node_->shape[1] + col];
}

std::span<double> Tensor::mutable_grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() const {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::Detach() const { return Tensor(shape(), node_->data, false); }

// ---------------------------------------------------------------------------
// Tape

namespace {
thread_local Tape* current_tape = nullptr;
}  // namespace

Tape::Tape() : previous_(current_tape) { current_tape = this; }

Tape::~Tape() { current_tape = previous_; }

Tape* Tape::Current() { return current_tape; }

void Tape::Record(Tensor output, Rule rule) {
  entries_.push_back({std::move(output), std::move(rule)});
}

void Tape::Backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        (loss.defined() ? ShapeToString(loss.shape())
                                        : std::string("<undefined>")));
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output.has_grad()) it->rule();
  }
}

void Backward(const Tensor& loss) {
  Tape* tape = Tape::Current();
  if (tape == nullptr) throw ContractError("backward() without an active tape");
  tape->Backward(loss);
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

bool Tracking(std::initializer_list<const Tensor*> inputs) {
  if (Tape::Current() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Record(const Tensor& out, Tape::Rule rule) {
  Tape::Current()->Record(out, std::move(rule));
}

void RequireRank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         ShapeToString(t.shape()));
  }
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         ShapeToString(a.shape()) + " vs " +
                         ShapeToString(b.shape()));
  }
}

// Accumulates `values` into the gradient of `t` if it participates.
void AccumulateGrad(Tensor t, std::span<const double> values) {
  if (!t.requires_grad()) return;
  auto g = t.mutable_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += values[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix products

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireRank(a, 2, "matmul");
  RequireRank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree for " +
                         ShapeToString(a.shape()) + " and " +
                         ShapeToString(b.shape()));
  }
  std::vector<double> c(m * n, 0.0);
  GemmAccumulate(m, n, k, a.data().data(), k, b.data().data(), n, c.data(), n);
  const bool track = Tracking({&a, &b});
  Tensor out({m, n}, std::move(c), track);
  if (track) {
    Record(out, [a, b, out, m, n, k]() mutable {
      const double* dc = out.grad().data();
      if (a.requires_grad()) {
        std::vector<double> bt(n * k);
        TransposeInto(k, n, b.data().data(), bt.data());
        GemmAccumulate(m, k, n, dc, n, bt.data(), k, a.mutable_grad().data(), k);
      }
      if (b.requires_grad()) {
        std::vector<double> at(k * m);
        TransposeInto(m, k, a.data().data(), at.data());
        GemmAccumulate(k, n, m, at.data(), m, dc, n, b.mutable_grad().data(), n);
      }
    });
  }
  return out;
}

Tensor MatMulTransposed(const Tensor& a, const Tensor& b) {
  RequireRank(a, 2, "matmul_transposed");
  RequireRank(b, 2, "matmul_transposed");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_transposed: inner dimensions disagree for " +
                         ShapeToString(a.shape()) + " and " +
                         ShapeToString(b.shape()) + "^T");
  }
  std::vector<double> bt(k * n);
  TransposeInto(n, k, b.data().data(), bt.data());
  std::vector<double> c(m * n, 0.0);
  GemmAccumulate(m, n, k, a.data().data(), k, bt.data(), n, c.data(), n);
  const bool track = Tracking({&a, &b});
  Tensor out({m, n}, std::move(c), track);
  if (track) {
    Record(out, [a, b, out, m, n, k]() mutable {
      const double* dc = out.grad().data();
      if (a.requires_grad()) {
        GemmAccumulate(m, k, n, dc, n, b.data().data(), k,
                       a.mutable_grad().data(), k);
      }
      if (b.requires_grad()) {
        std::vector<double> dct(n * m);
        TransposeInto(m, n, dc, dct.data());
        GemmAccumulate(n, k, m, dct.data(), m, a.data().data(), k,
                       b.mutable_grad().data(), k);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor Add(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "add");
  std::vector<double> c(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = x[i] + y[i];
  const bool track = Tracking({&a, &b});
  Tensor out(a.shape(), std::move(c), track);
  if (track) {
    Record(out, [a, b, out]() {
      AccumulateGrad(a, out.grad());
      AccumulateGrad(b, out.grad());
    });
  }
  return out;
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "sub");
  std::vector<double> c(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = x[i] - y[i];
  const bool track = Tracking({&a, &b});
  Tensor out(a.shape(), std::move(c), track);
  if (track) {
    Record(out, [a, b, out]() mutable {
      AccumulateGrad(a, out.grad());
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        auto d = out.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= d[i];
      }
    });
  }
  return out;
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "mul");
  std::vector<double> c(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = x[i] * y[i];
  const bool track = Tracking({&a, &b});
  Tensor out(a.shape(), std::move(c), track);
  if (track) {
    Record(out, [a, b, out]() mutable {
      auto d = out.grad();
      if (a.requires_grad()) {
        auto g = a.mutable_grad();
        auto y = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i] * y[i];
      }
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        auto x = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i] * x[i];
      }
    });
  }
  return out;
}

Tensor Scale(const Tensor& x, double factor) {
  std::vector<double> c(x.data().begin(), x.data().end());
  for (double& v : c) v *= factor;
  const bool track = Tracking({&x});
  Tensor out(x.shape(), std::move(c), track);
  if (track) {
    Record(out, [x, out, factor]() mutable {
      auto g = x.mutable_grad();
      auto d = out.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * d[i];
    });
  }
  return out;
}

Tensor AddRowBroadcast(const Tensor& x, const Tensor& b) {
  RequireRank(b, 1, "add_row_broadcast");
  const std::size_t n = b.dim(0);
  if (x.rank() == 0 || x.shape().back() != n) {
    throw DimensionError("add_row_broadcast: bias " + ShapeToString(b.shape()) +
                         " does not match last axis of " +
                         ShapeToString(x.shape()));
  }
  const std::size_t rows = x.numel() / n;
  std::vector<double> c(x.data().begin(), x.data().end());
  auto bias = b.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) c[r * n + j] += bias[j];
  const bool track = Tracking({&x, &b});
  Tensor out(x.shape(), std::move(c), track);
  if (track) {
    Record(out, [x, b, out, rows, n]() mutable {
      AccumulateGrad(x, out.grad());
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        auto d = out.grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j) g[j] += d[r * n + j];
      }
    });
  }
  return out;
}

Tensor Linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = MatMul(x, w);
  return b.defined() ? AddRowBroadcast(y, b) : y;
}

namespace {
double StableSigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}
}  // namespace

Tensor Apply(const Tensor& x, UnaryFn fn) {
  auto in = x.data();
  std::vector<double> c(in.size());
  switch (fn) {
    case UnaryFn::kRelu:
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = in[i] > 0 ? in[i] : 0.0;
      break;
    case UnaryFn::kTanh:
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::tanh(in[i]);
      break;
    case UnaryFn::kSigmoid:
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = StableSigmoid(in[i]);
      break;
    case UnaryFn::kExp:
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::exp(in[i]);
      break;
    case UnaryFn::kLog:
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (!(in[i] > 0)) {
          throw DomainError("log of non-positive value " + std::to_string(in[i]) +
                            " at flat index " + std::to_string(i));
        }
        c[i] = std::log(in[i]);
      }
      break;
  }
  const bool track = Tracking({&x});
  Tensor out(x.shape(), std::move(c), track);
  if (track) {
    Record(out, [x, out, fn]() mutable {
      auto g = x.mutable_grad();
      auto d = out.grad();
      auto y = out.data();
      auto v = x.data();
      switch (fn) {
        case UnaryFn::kRelu:
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += v[i] > 0 ? d[i] : 0.0;
          break;
        case UnaryFn::kTanh:
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i] * (1 - y[i] * y[i]);
          break;
        case UnaryFn::kSigmoid:
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i] * y[i] * (1 - y[i]);
          break;
        case UnaryFn::kExp:
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i] * y[i];
          break;
        case UnaryFn::kLog:
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i] / v[i];
          break;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (d == 0) throw DimensionError("layer_norm: empty last axis");
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gain " + ShapeToString(gain.shape()) +
                         " / bias " + ShapeToString(bias.shape()) +
                         " do not match last axis of " + ShapeToString(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  auto in = x.data();
  auto g = gain.data();
  auto b = bias.data();
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  std::vector<double> y(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * inv_std[r];
      xhat[r * d + j] = h;
      y[r * d + j] = h * g[j] + b[j];
    }
  }
  const bool track = Tracking({&x, &gain, &bias});
  Tensor out(x.shape(), std::move(y), track);
  if (track) {
    Record(out, [x, gain, bias, out, xhat = std::move(xhat),
                 inv_std = std::move(inv_std), rows, d]() mutable {
      auto dy = out.grad();
      if (gain.requires_grad()) {
        auto dg = gain.mutable_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) dg[j] += dy[r * d + j] * xhat[r * d + j];
      }
      if (bias.requires_grad()) {
        auto db = bias.mutable_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) db[j] += dy[r * d + j];
      }
      if (x.requires_grad()) {
        auto dx = x.mutable_grad();
        auto gv = gain.data();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_dh = 0, mean_dh_h = 0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = dy[r * d + j] * gv[j];
            mean_dh += dh;
            mean_dh_h += dh * xhat[r * d + j];
          }
          mean_dh *= inv_d;
          mean_dh_h *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = dy[r * d + j] * gv[j];
            dx[r * d + j] +=
                inv_std[r] * (dh - mean_dh - xhat[r * d + j] * mean_dh_h);
          }
        }
      }
    });
  }
  return out;
}

Tensor Softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) +
                         " out of range for " + ShapeToString(x.shape()));
  }
  const auto& s = x.shape();
  const std::size_t n = s[axis];
  const std::size_t inner = NumElements(Shape(s.begin() + axis + 1, s.end()));
  const std::size_t outer = NumElements(Shape(s.begin(), s.begin() + axis));
  auto in = x.data();
  std::vector<double> y(in.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      double mx = in[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[base + j * inner]);
      double sum = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(in[base + j * inner] - mx);
        y[base + j * inner] = e;
        sum += e;
      }
      for (std::size_t j = 0; j < n; ++j) y[base + j * inner] /= sum;
    }
  }
  const bool track = Tracking({&x});
  Tensor out(x.shape(), std::move(y), track);
  if (track) {
    Record(out, [x, out, outer, inner, n]() mutable {
      auto dx = x.mutable_grad();
      auto dy = out.grad();
      auto yv = out.data();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t base = o * n * inner + i;
          double dot = 0;
          for (std::size_t j = 0; j < n; ++j)
            dot += dy[base + j * inner] * yv[base + j * inner];
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t idx = base + j * inner;
            dx[idx] += yv[idx] * (dy[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution (im2col + gemm)

Tensor Conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias,
              const Conv2dParams& p) {
  RequireRank(x, 3, "conv2d input");
  RequireRank(kernels, 4, "conv2d kernels");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != cin) {
    throw DimensionError("conv2d: kernels " + ShapeToString(kernels.shape()) +
                         " expect " + std::to_string(kernels.dim(1)) +
                         " input channels, input is " + ShapeToString(x.shape()));
  }
  if (p.stride_h == 0 || p.stride_w == 0) throw DimensionError("conv2d: zero stride");
  if (h + 2 * p.pad_h < kh || w + 2 * p.pad_w < kw) {
    throw DimensionError("conv2d: kernel " + ShapeToString(kernels.shape()) +
                         " larger than padded input " + ShapeToString(x.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{cout}) {
    throw DimensionError("conv2d: bias " + ShapeToString(bias.shape()) +
                         " does not match " + std::to_string(cout) + " channels");
  }
  const std::size_t ho = (h + 2 * p.pad_h - kh) / p.stride_h + 1;
  const std::size_t wo = (w + 2 * p.pad_w - kw) / p.stride_w + 1;
  const std::size_t positions = ho * wo;
  const std::size_t patch = cin * kh * kw;

  // cols[pos][c, i, j] = padded x[c, oh*sh + i - ph, ow*sw + j - pw]
  std::vector<double> cols(positions * patch, 0.0);
  auto in = x.data();
  for (std::size_t oh = 0; oh < ho; ++oh) {
    for (std::size_t ow = 0; ow < wo; ++ow) {
      double* col = cols.data() + (oh * wo + ow) * patch;
      for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t i = 0; i < kh; ++i) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * p.stride_h + i) -
                                    static_cast<std::ptrdiff_t>(p.pad_h);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t j = 0; j < kw; ++j) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * p.stride_w + j) -
                                      static_cast<std::ptrdiff_t>(p.pad_w);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
            col[(c * kh + i) * kw + j] = in[(c * h + ih) * w + iw];
          }
        }
      }
    }
  }
  std::vector<double> kt(patch * cout);
  TransposeInto(cout, patch, kernels.data().data(), kt.data());
  std::vector<double> out_pc(positions * cout, 0.0);
  GemmAccumulate(positions, cout, patch, cols.data(), patch, kt.data(), cout,
                 out_pc.data(), cout);
  std::vector<double> y(cout * positions);
  TransposeInto(positions, cout, out_pc.data(), y.data());
  if (bias.defined()) {
    auto bv = bias.data();
    for (std::size_t c = 0; c < cout; ++c)
      for (std::size_t q = 0; q < positions; ++q) y[c * positions + q] += bv[c];
  }

  const bool track = Tracking({&x, &kernels, &bias});
  Tensor out({cout, ho, wo}, std::move(y), track);
  if (track) {
    Record(out, [x, kernels, bias, out, cols = std::move(cols), p, cin, h, w,
                 cout, kh, kw, ho, wo, positions, patch]() mutable {
      const double* dy = out.grad().data();
      if (kernels.requires_grad()) {
        GemmAccumulate(cout, patch, positions, dy, positions, cols.data(), patch,
                       kernels.mutable_grad().data(), patch);
      }
      if (bias.defined() && bias.requires_grad()) {
        auto db = bias.mutable_grad();
        for (std::size_t c = 0; c < cout; ++c)
          for (std::size_t q = 0; q < positions; ++q) db[c] += dy[c * positions + q];
      }
      if (x.requires_grad()) {
        std::vector<double> dyt(positions * cout);
        TransposeInto(cout, positions, dy, dyt.data());
        std::vector<double> dcols(positions * patch, 0.0);
        GemmAccumulate(positions, patch, cout, dyt.data(), cout,
                       kernels.data().data(), patch, dcols.data(), patch);
        auto dx = x.mutable_grad();
        for (std::size_t oh = 0; oh < ho; ++oh) {
          for (std::size_t ow = 0; ow < wo; ++ow) {
            const double* col = dcols.data() + (oh * wo + ow) * patch;
            for (std::size_t c = 0; c < cin; ++c) {
              for (std::size_t i = 0; i < kh; ++i) {
                const std::ptrdiff_t ih =
                    static_cast<std::ptrdiff_t>(oh * p.stride_h + i) -
                    static_cast<std::ptrdiff_t>(p.pad_h);
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t j = 0; j < kw; ++j) {
                  const std::ptrdiff_t iw =
                      static_cast<std::ptrdiff_t>(ow * p.stride_w + j) -
                      static_cast<std::ptrdiff_t>(p.pad_w);
                  if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
                  dx[(c * h + ih) * w + iw] += col[(c * kh + i) * kw + j];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor Conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, std::size_t pad) {
  RequireRank(x, 2, "conv1d input");
  RequireRank(kernels, 3, "conv1d kernels");
  Tensor x4 = Reshape(x, {x.dim(0), 1, x.dim(1)});
  Tensor k4 = Reshape(kernels, {kernels.dim(0), kernels.dim(1), 1, kernels.dim(2)});
  Tensor y = Conv2d(x4, k4, bias, {1, stride, 0, pad});
  return Reshape(y, {y.dim(0), y.dim(2)});
}

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + ShapeToString(x.shape()) +
                         " as " + ShapeToString(shape));
  }
  const bool track = Tracking({&x});
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()),
             track);
  if (track) Record(out, [x, out]() { AccumulateGrad(x, out.grad()); });
  return out;
}

Tensor Transpose(const Tensor& x) {
  RequireRank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> y(x.numel());
  TransposeInto(r, c, x.data().data(), y.data());
  const bool track = Tracking({&x});
  Tensor out({c, r}, std::move(y), track);
  if (track) {
    Record(out, [x, out, r, c]() mutable {
      std::vector<double> back(r * c);
      TransposeInto(c, r, out.grad().data(), back.data());
      AccumulateGrad(x, back);
    });
  }
  return out;
}

Tensor Permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  RequireRank(x, 3, "permute");
  if (perm.size() != 3) throw DimensionError("permute: need 3 axes");
  std::vector<bool> seen(3, false);
  for (std::size_t a : perm) {
    if (a >= 3 || seen[a]) throw DimensionError("permute: invalid permutation");
    seen[a] = true;
  }
  const Shape& in_shape = x.shape();
  const std::size_t in_strides[3] = {in_shape[1] * in_shape[2], in_shape[2], 1};
  const Shape out_shape = {in_shape[perm[0]], in_shape[perm[1]], in_shape[perm[2]]};
  // source flat index for every destination flat index
  std::vector<std::size_t> index(x.numel());
  std::size_t dst = 0;
  for (std::size_t i = 0; i < out_shape[0]; ++i)
    for (std::size_t j = 0; j < out_shape[1]; ++j)
      for (std::size_t k = 0; k < out_shape[2]; ++k)
        index[dst++] = i * in_strides[perm[0]] + j * in_strides[perm[1]] +
                       k * in_strides[perm[2]];
  auto in = x.data();
  std::vector<double> y(x.numel());
  for (std::size_t q = 0; q < y.size(); ++q) y[q] = in[index[q]];
  const bool track = Tracking({&x});
  Tensor out(out_shape, std::move(y), track);
  if (track) {
    Record(out, [x, out, index = std::move(index)]() mutable {
      auto g = x.mutable_grad();
      auto d = out.grad();
      for (std::size_t q = 0; q < d.size(); ++q) g[index[q]] += d[q];
    });
  }
  return out;
}

Tensor SliceRows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin > end || end > x.dim(0)) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " +
                         ShapeToString(x.shape()));
  }
  const std::size_t row = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  auto in = x.data();
  const bool track = Tracking({&x});
  Tensor out(std::move(shape),
             std::vector<double>(in.begin() + begin * row, in.begin() + end * row),
             track);
  if (track) {
    Record(out, [x, out, begin, row]() mutable {
      auto g = x.mutable_grad();
      auto d = out.grad();
      for (std::size_t q = 0; q < d.size(); ++q) g[begin * row + q] += d[q];
    });
  }
  return out;
}

Tensor SliceCols(const Tensor& x, std::size_t begin, std::size_t end) {
  RequireRank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (begin > end || end > cols) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " +
                         ShapeToString(x.shape()));
  }
  const std::size_t width = end - begin;
  auto in = x.data();
  std::vector<double> y(rows * width);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(in.begin() + r * cols + begin, width, y.begin() + r * width);
  const bool track = Tracking({&x});
  Tensor out({rows, width}, std::move(y), track);
  if (track) {
    Record(out, [x, out, rows, cols, begin, width]() mutable {
      auto g = x.mutable_grad();
      auto d = out.grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < width; ++j) g[r * cols + begin + j] += d[r * width + j];
    });
  }
  return out;
}

Tensor ConcatRows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Shape shape = parts[0].shape();
  if (shape.empty()) throw DimensionError("concat_rows: scalar input");
  std::size_t rows = 0;
  for (const Tensor& t : parts) {
    if (t.rank() != shape.size() ||
        !std::equal(shape.begin() + 1, shape.end(), t.shape().begin() + 1)) {
      throw DimensionError("concat_rows: " + ShapeToString(t.shape()) +
                           " incompatible with " + ShapeToString(shape));
    }
    rows += t.dim(0);
  }
  shape[0] = rows;
  std::vector<double> y;
  y.reserve(NumElements(shape));
  bool track = false;
  for (const Tensor& t : parts) {
    y.insert(y.end(), t.data().begin(), t.data().end());
    track = track || Tracking({&t});
  }
  Tensor out(std::move(shape), std::move(y), track);
  if (track) {
    Record(out, [parts, out]() {
      auto d = out.grad();
      std::size_t offset = 0;
      for (Tensor t : parts) {
        if (t.requires_grad()) {
          auto g = t.mutable_grad();
          for (std::size_t q = 0; q < g.size(); ++q) g[q] += d[offset + q];
        }
        offset += t.numel();
      }
    });
  }
  return out;
}

Tensor ConcatCols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::size_t cols = 0;
  bool track = false;
  for (const Tensor& t : parts) {
    if (t.rank() != 2 || t.dim(0) != rows) {
      throw DimensionError("concat_cols: " + ShapeToString(t.shape()) +
                           " incompatible with " + std::to_string(rows) + " rows");
    }
    cols += t.dim(1);
    track = track || Tracking({&t});
  }
  std::vector<double> y(rows * cols);
  std::size_t offset = 0;
  for (const Tensor& t : parts) {
    const std::size_t w = t.dim(1);
    auto in = t.data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(in.begin() + r * w, w, y.begin() + r * cols + offset);
    offset += w;
  }
  Tensor out({rows, cols}, std::move(y), track);
  if (track) {
    Record(out, [parts, out, rows, cols]() {
      auto d = out.grad();
      std::size_t off = 0;
      for (Tensor t : parts) {
        const std::size_t w = t.dim(1);
        if (t.requires_grad()) {
          auto g = t.mutable_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < w; ++j) g[r * w + j] += d[r * cols + off + j];
        }
        off += w;
      }
    });
  }
  return out;
}

Tensor ReverseRows(const Tensor& x) {
  RequireRank(x, 2, "reverse_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  auto in = x.data();
  std::vector<double> y(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(in.begin() + (rows - 1 - r) * cols, cols, y.begin() + r * cols);
  const bool track = Tracking({&x});
  Tensor out(x.shape(), std::move(y), track);
  if (track) {
    Record(out, [x, out, rows, cols]() mutable {
      auto g = x.mutable_grad();
      auto d = out.grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j)
          g[(rows - 1 - r) * cols + j] += d[r * cols + j];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

Tensor Sum(const Tensor& x) {
  double s = 0;
  for (double v : x.data()) s += v;
  const bool track = Tracking({&x});
  Tensor out({}, {s}, track);
  if (track) {
    Record(out, [x, out]() mutable {
      const double d = out.grad()[0];
      for (double& g : x.mutable_grad()) g += d;
    });
  }
  return out;
}

Tensor Mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return Scale(Sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor MeanSquaredError(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "mse");
  if (a.numel() == 0) throw DimensionError("mse of empty tensors");
  auto x = a.data(), y = b.data();
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  const bool track = Tracking({&a, &b});
  Tensor out({}, {s * inv_n}, track);
  if (track) {
    Record(out, [a, b, out, inv_n]() mutable {
      const double d = out.grad()[0] * 2.0 * inv_n;
      auto x = a.data(), y = b.data();
      if (a.requires_grad()) {
        auto g = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += d * (x[i] - y[i]);
      }
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= d * (x[i] - y[i]);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------

Tensor InitNormal(Shape shape, double mean, double stddev, std::uint64_t seed) {
  if (!(stddev > 0)) {
    throw DomainError("init_normal: std must be positive, got " +
                      std::to_string(stddev));
  }
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(mean, stddev);
  std::vector<double> data(NumElements(shape));
  for (double& v : data) v = dist(gen);
  return Tensor(std::move(shape), std::move(data), true);
}

}  // namespace dereverb
