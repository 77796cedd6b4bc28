// Copyright 2026 The coop-explain Authors.
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

#include <atomic>
#include <cstdlib>
#include <string>

#include "coop/simd/kernels.hpp"

namespace coop::simd {

#if defined(COOP_HAVE_AVX2_KERNELS)
const KernelTable& avx2_kernel_table();
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() {
#if defined(COOP_HAVE_AVX2_KERNELS)
  static const bool supported = __builtin_cpu_supports("avx2");
  if (supported) return &avx2_kernel_table();
#endif
  return nullptr;
}

namespace {

const KernelTable* select_default() {
  if (const char* env = std::getenv("COOP_EXPLAIN_ISA")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && avx2_kernels() != nullptr) return avx2_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{select_default()};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active_table().load(std::memory_order_relaxed); }

Isa active_isa() { return kernels().isa; }

bool set_active_isa(Isa isa) {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::scalar:
      t = &scalar_kernels();
      break;
    case Isa::avx2:
      t = avx2_kernels();
      break;
  }
  if (t == nullptr) return false;
  active_table().store(t, std::memory_order_relaxed);
  return true;
}

}  // namespace coop::simd
