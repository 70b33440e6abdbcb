// include/dereverb/gradcheck.h

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

#ifndef DEREVERB_GRADCHECK_H_
#define DEREVERB_GRADCHECK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "dereverb/tensor.h"

namespace dereverb {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares tape gradients of `loss_fn` against central finite differences for
// `coords_per_tensor` coordinates of every tensor in `params` (all
// coordinates when 0). Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult CheckGradients(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                               std::size_t coords_per_tensor = 0, double h = 1e-6,
                               double floor = 1e-6, std::uint64_t seed = 7);

}  // namespace dereverb

#endif  // DEREVERB_GRADCHECK_H_
