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

#include <cstdlib>
#include <string_view>

#include "dubhe/kernels.hpp"

namespace dubhe::simd {

#ifndef DUBHE_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(DUBHE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& detect() {
  if (const char* env = std::getenv("DUBHE_KERNELS"); env != nullptr && std::string_view(env) == "scalar") {
    return scalar_kernels();
  }
  if (cpu_has_avx2()) {
    if (const KernelTable* t = avx2_kernels(); t != nullptr) return *t;
  }
  return scalar_kernels();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = detect();
  return table;
}

}  // namespace dubhe::simd
