// tests/test_util.h

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

#ifndef DEREVERB_TESTS_TEST_UTIL_H_
#define DEREVERB_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "dereverb/gradcheck.h"
#include "dereverb/tensor.h"

namespace dereverb::testing {

inline std::vector<double> RandomVector(std::size_t n, std::uint64_t seed,
                                        double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

inline Tensor RandomTensor(Shape shape, std::uint64_t seed, bool requires_grad = false,
                           double lo = -1.0, double hi = 1.0) {
  const std::size_t n = NumElements(shape);
  return Tensor(std::move(shape), RandomVector(n, seed, lo, hi), requires_grad);
}

// Sum of x ⊙ w for a fixed random w; turns any tensor into a scalar with a
// non-trivial gradient.
inline Tensor RandomProjection(const Tensor& x, std::uint64_t seed) {
  Tensor w(x.shape(), RandomVector(x.numel(), seed));
  return Sum(Mul(x, w));
}

using dereverb::CheckGradients;
using dereverb::GradCheckResult;

inline double MaxAbsDiff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace dereverb::testing

#endif  // DEREVERB_TESTS_TEST_UTIL_H_
