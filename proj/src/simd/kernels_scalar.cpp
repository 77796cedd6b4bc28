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

#include <cmath>

#include "coop/simd/kernels.hpp"

namespace coop::simd {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void axpby_scalar(double a, const double* x, double b, const double* y, double* out,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void shift_scale_scalar(const double* x, double shift, double scale, double* out,
                        std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] + shift) * scale;
}

void fill_scalar(double value, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = value;
}

double max_abs_scalar(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(x[i]));
  return m;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

std::size_t puct_argmax_scalar(const PuctInputs& in) {
  const std::size_t n = in.prior.size();
  std::size_t best = 0;
  double best_val = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    const double visits = static_cast<double>(in.visits[i]);
    double exploit;
    if (in.value_is_sum) {
      exploit = in.visits[i] == 0 ? 0.0 : in.value[i] / visits;
    } else {
      exploit = in.value[i];
    }
    const double explore = in.c_puct * in.prior[i] * in.sqrt_parent_visits / (1.0 + visits);
    const double v = exploit + explore;
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  return best;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar,     axpy_scalar,    axpby_scalar,
                                 shift_scale_scalar, fill_scalar, max_abs_scalar,
                                 dot_scalar,      sum_scalar,     puct_argmax_scalar};
  return table;
}

}  // namespace coop::simd
