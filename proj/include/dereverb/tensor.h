// include/dereverb/tensor.h

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

#ifndef DEREVERB_TENSOR_H_
#define DEREVERB_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dereverb {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

namespace internal {
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient flows in
  bool requires_grad = false;
};
}  // namespace internal

// Dense row-major tensor of 64-bit floats. Copies share storage; values are
// not modified after creation except through the explicit mutable accessors
// used by initializers and optimizers.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor Scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double item() const;
  // Element access for rank-2 tensors.
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  // Allocates a zero gradient buffer on first use.
  std::span<double> mutable_grad() const;
  void zero_grad() const;

  // Same data, no gradient tracking.
  Tensor Detach() const;

  bool SameNode(const Tensor& other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<internal::TensorNode> node_;
};

// Records differentiable operations while alive. Constructing a Tape makes
// it the current tape of the calling thread; operations on tensors that
// require gradients are appended to it in execution order, which is a valid
// topological order of the computation.
class Tape {
 public:
  using Rule = std::function<void()>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* Current();

  void Record(Tensor output, Rule rule);
  std::size_t size() const { return entries_.size(); }

  // Replays gradient rules in reverse recording order starting from a scalar
  // loss. Gradients accumulate additively into every reachable tensor that
  // requires them.
  void Backward(const Tensor& loss);

 private:
  struct Entry {
    Tensor output;
    Rule rule;
  };
  std::vector<Entry> entries_;
  Tape* previous_ = nullptr;
};

// Backward on the current thread's tape.
void Backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Operations. All record gradient rules when a tape is active and at least
// one input requires a gradient.

Tensor MatMul(const Tensor& a, const Tensor& b);
// a · bᵀ with b given as [n×k].
Tensor MatMulTransposed(const Tensor& a, const Tensor& b);

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& x, double factor);
// x[m×n] + b[n] broadcast over rows.
Tensor AddRowBroadcast(const Tensor& x, const Tensor& b);
// x·w (+ b when defined).
Tensor Linear(const Tensor& x, const Tensor& w, const Tensor& b);

enum class UnaryFn { kRelu, kTanh, kSigmoid, kExp, kLog };
Tensor Apply(const Tensor& x, UnaryFn fn);
inline Tensor Relu(const Tensor& x) { return Apply(x, UnaryFn::kRelu); }
inline Tensor Tanh(const Tensor& x) { return Apply(x, UnaryFn::kTanh); }
inline Tensor Sigmoid(const Tensor& x) { return Apply(x, UnaryFn::kSigmoid); }
inline Tensor Exp(const Tensor& x) { return Apply(x, UnaryFn::kExp); }
inline Tensor Log(const Tensor& x) { return Apply(x, UnaryFn::kLog); }

// Normalizes over the last axis, then applies gain and bias of that size.
Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps = 1e-5);
Tensor Softmax(const Tensor& x, std::size_t axis);

struct Conv2dParams {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
};
// x: [C_in×H×W], kernels: [C_out×C_in×kh×kw], bias: [C_out] or undefined.
Tensor Conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias,
              const Conv2dParams& params);
// x: [C_in×L], kernels: [C_out×C_in×k], bias: [C_out] or undefined.
Tensor Conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, std::size_t pad);

Tensor Reshape(const Tensor& x, Shape shape);
Tensor Transpose(const Tensor& x);  // rank 2
// Rank-3 axis permutation; out.shape[i] = x.shape[perm[i]].
Tensor Permute(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor SliceRows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor SliceCols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor ConcatRows(const std::vector<Tensor>& parts);
Tensor ConcatCols(const std::vector<Tensor>& parts);
Tensor ReverseRows(const Tensor& x);

Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);
// mean((a - b)^2) over all elements.
Tensor MeanSquaredError(const Tensor& a, const Tensor& b);

// Deterministic normal initialization; throws DomainError when std <= 0.
Tensor InitNormal(Shape shape, double mean, double stddev, std::uint64_t seed);

}  // namespace dereverb

#endif  // DEREVERB_TENSOR_H_
