// src/gemm.h

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

#ifndef DEREVERB_SRC_GEMM_H_
#define DEREVERB_SRC_GEMM_H_

#include <cstddef>

namespace dereverb::internal {

// C[m×n] += A[m×k] · B[k×n], all row-major with the given leading dimensions.
// The summation order over k is fixed, so results do not depend on blocking
// parameters across calls with identical shapes.
void GemmAccumulate(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc);

// Writes the transpose of src[rows×cols] into dst[cols×rows].
void TransposeInto(std::size_t rows, std::size_t cols, const double* src,
                   double* dst);

}  // namespace dereverb::internal

#endif  // DEREVERB_SRC_GEMM_H_
