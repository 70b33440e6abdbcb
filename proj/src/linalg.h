// src/linalg.h

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

#ifndef DEREVERB_SRC_LINALG_H_
#define DEREVERB_SRC_LINALG_H_

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dereverb::internal {

inline double Conj(double x) { return x; }
inline std::complex<double> Conj(std::complex<double> x) { return std::conj(x); }
inline double RealPart(double x) { return x; }
inline double RealPart(std::complex<double> x) { return x.real(); }

// Overwrites the lower triangle of the row-major n×n Hermitian matrix `a`
// with L such that A = L·Lᴴ. Returns false when a pivot is not positive.
template <typename T>
bool CholeskyFactor(std::vector<T>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double diag = RealPart(a[j * n + j]);
    for (std::size_t p = 0; p < j; ++p) diag -= std::norm(a[j * n + p]);
    if (!(diag > 0) || !std::isfinite(diag)) return false;
    const double ljj = std::sqrt(diag);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      T s = a[i * n + j];
      for (std::size_t p = 0; p < j; ++p) s -= a[i * n + p] * Conj(a[j * n + p]);
      a[i * n + j] = s / ljj;
    }
  }
  return true;
}

// Solves L·Lᴴ·x = b in place given the factor from CholeskyFactor.
template <typename T>
void CholeskySolve(const std::vector<T>& l, std::size_t n, std::span<T> b) {
  for (std::size_t i = 0; i < n; ++i) {
    T s = b[i];
    for (std::size_t p = 0; p < i; ++p) s -= l[i * n + p] * b[p];
    b[i] = s / l[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    T s = b[i];
    for (std::size_t p = i + 1; p < n; ++p) s -= Conj(l[p * n + i]) * b[p];
    b[i] = s / l[i * n + i];
  }
}

}  // namespace dereverb::internal

#endif  // DEREVERB_SRC_LINALG_H_
