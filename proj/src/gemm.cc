// src/gemm.cc

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

#include "gemm.h"

#include <algorithm>

namespace dereverb::internal {

namespace {
constexpr std::size_t kBlockK = 64;
constexpr std::size_t kBlockN = 512;
}  // namespace

void GemmAccumulate(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc) {
  // Blocking over n and k keeps a panel of B in cache while sweeping the
  // rows of A. For each output element the k-order of accumulation is
  // ascending regardless of block sizes.
  for (std::size_t j0 = 0; j0 < n; j0 += kBlockN) {
    const std::size_t j1 = std::min(n, j0 + kBlockN);
    const std::size_t width = j1 - j0;
    for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
      const std::size_t p1 = std::min(k, p0 + kBlockK);
      for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = a + i * lda;
        double* __restrict c_row = c + i * ldc + j0;
        for (std::size_t p = p0; p < p1; ++p) {
          const double scale = a_row[p];
          if (scale == 0.0) continue;
          const double* __restrict b_row = b + p * ldb + j0;
          for (std::size_t j = 0; j < width; ++j) c_row[j] += scale * b_row[j];
        }
      }
    }
  }
}

void TransposeInto(std::size_t rows, std::size_t cols, const double* src,
                   double* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    const std::size_t r1 = std::min(rows, r0 + kTile);
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

}  // namespace dereverb::internal
