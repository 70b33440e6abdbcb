// src/gradcheck.cc

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

#include "dereverb/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <random>

namespace dereverb {

GradCheckResult CheckGradients(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                               std::size_t coords_per_tensor, double h, double floor,
                               std::uint64_t seed) {
  for (Tensor& p : params) p.zero_grad();
  {
    Tape tape;
    Tensor loss = loss_fn();
    tape.Backward(loss);
  }
  std::mt19937_64 gen(seed);
  GradCheckResult result;
  for (Tensor& p : params) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    if (analytic.empty()) analytic.assign(p.numel(), 0.0);
    std::vector<std::size_t> coords;
    if (coords_per_tensor == 0 || coords_per_tensor >= p.numel()) {
      for (std::size_t i = 0; i < p.numel(); ++i) coords.push_back(i);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, p.numel() - 1);
      for (std::size_t i = 0; i < coords_per_tensor; ++i) coords.push_back(pick(gen));
    }
    auto data = p.mutable_data();
    for (std::size_t i : coords) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss_fn().item();
      data[i] = saved - h;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      result.max_rel_error =
          std::max(result.max_rel_error, std::abs(analytic[i] - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace dereverb
