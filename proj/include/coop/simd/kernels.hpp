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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

// Data-parallel inner loops shared by the language model, the logistic
// regression trainer, the tree search and the metrics.
//
// Every kernel has a scalar reference implementation. SIMD variants are
// selected once at runtime from the CPU features (override with the
// COOP_EXPLAIN_ISA environment variable: "scalar" or "avx2").
//
// Contract between variants:
//   - elementwise kernels and argmax/max kernels are bit-identical,
//   - reductions (dot, sum) agree to a few ulps; they are only used by
//     the evaluation metrics, never on the training or search path.
namespace coop::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// Inputs to the PUCT child selection. `value` is the running score sum
/// (mean aggregation) or the running maximum (max aggregation).
struct PuctInputs {
  std::span<const double> prior;
  std::span<const double> value;
  std::span<const std::uint32_t> visits;
  double c_puct = 0.0;
  double sqrt_parent_visits = 0.0;
  bool value_is_sum = true;
};

struct KernelTable {
  Isa isa;
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out[i] = a * x[i] + b * y[i]
  void (*axpby)(double a, const double* x, double b, const double* y, double* out, std::size_t n);
  // out[i] = (x[i] + shift) * scale
  void (*shift_scale)(const double* x, double shift, double scale, double* out, std::size_t n);
  void (*fill)(double value, double* out, std::size_t n);
  double (*max_abs)(const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // argmax over children of
  //   exploit(i) + c_puct * prior[i] * sqrt_parent / (1 + visits[i])
  // with exploit(i) = value[i] / visits[i] (0 when unvisited) for sums and
  // value[i] otherwise. Ties resolve to the lowest index.
  std::size_t (*puct_argmax)(const PuctInputs& in);
};

const KernelTable& scalar_kernels();
/// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_kernels();

/// The table used by the library. Chosen on first use.
const KernelTable& kernels();
Isa active_isa();
/// Forces a variant for the rest of the process (tests, benchmarking).
/// Returns false if the variant is unavailable.
bool set_active_isa(Isa isa);

// Convenience wrappers over the active table.
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  kernels().axpy(a, x.data(), y.data(), x.size());
}
inline void axpby(double a, std::span<const double> x, double b, std::span<const double> y,
                  std::span<double> out) {
  kernels().axpby(a, x.data(), b, y.data(), out.data(), x.size());
}
inline void shift_scale(std::span<const double> x, double shift, double scale,
                        std::span<double> out) {
  kernels().shift_scale(x.data(), shift, scale, out.data(), x.size());
}
inline void fill(std::span<double> out, double value) {
  kernels().fill(value, out.data(), out.size());
}
inline double max_abs(std::span<const double> x) { return kernels().max_abs(x.data(), x.size()); }
inline double dot(std::span<const double> x, std::span<const double> y) {
  return kernels().dot(x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) { return kernels().sum(x.data(), x.size()); }
inline std::size_t puct_argmax(const PuctInputs& in) { return kernels().puct_argmax(in); }

}  // namespace coop::simd
