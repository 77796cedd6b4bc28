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

// Compiled with -mavx2 only. No FMA: each lane must round exactly like the
// scalar reference.

#include <immintrin.h>

#include <cmath>

#include "coop/simd/kernels.hpp"

namespace coop::simd {
namespace {

constexpr std::size_t kLanes = 4;

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void axpby_avx2(double a, const double* x, double b, const double* y, double* out,
                std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d ax = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    const __m256d by = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(ax, by));
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void shift_scale_avx2(const double* x, double shift, double scale, double* out,
                      std::size_t n) {
  const __m256d vs = _mm256_set1_pd(shift);
  const __m256d vk = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d t = _mm256_add_pd(_mm256_loadu_pd(x + i), vs);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(t, vk));
  }
  for (; i < n; ++i) out[i] = (x[i] + shift) * scale;
}

void fill_avx2(double value, double* out, std::size_t n) {
  const __m256d v = _mm256_set1_pd(value);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) _mm256_storeu_pd(out + i, v);
  for (; i < n; ++i) out[i] = value;
}

double hmax(__m256d v) {
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, v);
  return std::fmax(std::fmax(lanes[0], lanes[1]), std::fmax(lanes[2], lanes[3]));
}

double max_abs_avx2(const double* x, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    m = _mm256_max_pd(m, _mm256_andnot_pd(sign, _mm256_loadu_pd(x + i)));
  }
  double r = hmax(m);
  for (; i < n; ++i) r = std::fmax(r, std::fabs(x[i]));
  return r;
}

double hsum(__m256d v) {
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    acc1 = _mm256_add_pd(
        acc1, _mm256_mul_pd(_mm256_loadu_pd(x + i + kLanes), _mm256_loadu_pd(y + i + kLanes)));
  }
  double r = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + kLanes));
  }
  double r = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) r += x[i];
  return r;
}

std::size_t puct_argmax_avx2(const PuctInputs& in) {
  const std::size_t n = in.prior.size();
  const double* prior = in.prior.data();
  const double* value = in.value.data();
  const std::uint32_t* visits = in.visits.data();

  const __m256d c = _mm256_set1_pd(in.c_puct);
  const __m256d sq = _mm256_set1_pd(in.sqrt_parent_visits);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();

  __m256d best_val = _mm256_set1_pd(-INFINITY);
  __m256i best_idx = _mm256_setzero_si256();
  __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);
  const __m256i step = _mm256_set1_epi64x(kLanes);

  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(visits + i));
    // visit counts fit in 31 bits in practice; the signed conversion is exact there.
    const __m256d nv = _mm256_cvtepi32_pd(vi);
    __m256d exploit = _mm256_loadu_pd(value + i);
    if (in.value_is_sum) {
      const __m256d mean = _mm256_div_pd(exploit, nv);
      const __m256d unvisited = _mm256_cmp_pd(nv, zero, _CMP_EQ_OQ);
      exploit = _mm256_blendv_pd(mean, zero, unvisited);
    }
    const __m256d explore =
        _mm256_div_pd(_mm256_mul_pd(_mm256_mul_pd(c, _mm256_loadu_pd(prior + i)), sq),
                      _mm256_add_pd(one, nv));
    const __m256d v = _mm256_add_pd(exploit, explore);
    const __m256d gt = _mm256_cmp_pd(v, best_val, _CMP_GT_OQ);
    best_val = _mm256_blendv_pd(best_val, v, gt);
    best_idx = _mm256_castpd_si256(
        _mm256_blendv_pd(_mm256_castsi256_pd(best_idx), _mm256_castsi256_pd(idx), gt));
    idx = _mm256_add_epi64(idx, step);
  }

  alignas(32) double lane_val[kLanes];
  alignas(32) std::int64_t lane_idx[kLanes];
  _mm256_store_pd(lane_val, best_val);
  _mm256_store_si256(reinterpret_cast<__m256i*>(lane_idx), best_idx);

  double bv = -INFINITY;
  std::size_t bi = 0;
  for (std::size_t l = 0; l < kLanes; ++l) {
    if (lane_val[l] == -INFINITY) continue;
    const auto li = static_cast<std::size_t>(lane_idx[l]);
    if (lane_val[l] > bv || (lane_val[l] == bv && li < bi)) {
      bv = lane_val[l];
      bi = li;
    }
  }
  for (; i < n; ++i) {
    const double nvis = static_cast<double>(visits[i]);
    double exploit;
    if (in.value_is_sum) {
      exploit = visits[i] == 0 ? 0.0 : value[i] / nvis;
    } else {
      exploit = value[i];
    }
    const double v = exploit + in.c_puct * prior[i] * in.sqrt_parent_visits / (1.0 + nvis);
    if (v > bv) {
      bv = v;
      bi = i;
    }
  }
  return bi;
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{Isa::avx2,      axpy_avx2,    axpby_avx2,
                                 shift_scale_avx2, fill_avx2,  max_abs_avx2,
                                 dot_avx2,       sum_avx2,     puct_argmax_avx2};
  return table;
}

}  // namespace coop::simd
