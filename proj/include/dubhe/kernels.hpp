/**
 * Copyright 2026 The Dubhe Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DUBHE_KERNELS_HPP_
#define DUBHE_KERNELS_HPP_

#include <span>
#include <string_view>

namespace dubhe::simd {

// Dense double-precision inner loops used by training and distribution
// metrics. Every kernel has a scalar reference implementation; vector
// variants are selected once at startup from CPU features and must agree
// with the reference up to floating-point reassociation.
//
// Lengths are not checked inside kernels; callers guarantee equal spans.

using DotFn = double (*)(const double* a, const double* b, std::size_t n);
using AxpyFn = void (*)(double alpha, const double* x, double* y, std::size_t n);
using ScaleFn = void (*)(double alpha, double* x, std::size_t n);
using DistFn = double (*)(const double* a, const double* b, std::size_t n);
using SumFn = double (*)(const double* a, std::size_t n);

struct KernelTable {
  std::string_view name;
  DotFn dot;
  AxpyFn axpy;             // y += alpha * x
  ScaleFn scale;           // x *= alpha
  DistFn l1_distance;      // sum |a - b|
  DistFn squared_distance; // sum (a - b)^2
  SumFn sum;
};

const KernelTable& scalar_kernels();
/// nullptr when the vector variant was not compiled in.
const KernelTable* avx2_kernels();

bool cpu_has_avx2();

/// Kernels used by the library. Chosen on first call: AVX2+FMA when the CPU
/// supports it, scalar otherwise. DUBHE_KERNELS=scalar forces the reference.
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }
inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  return active().l1_distance(a.data(), b.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }

}  // namespace dubhe::simd

#endif  // DUBHE_KERNELS_HPP_
