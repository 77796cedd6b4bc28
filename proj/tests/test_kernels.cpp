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
#include <limits>
#include <random>
#include <vector>

#include "coop/simd/kernels.hpp"
#include "doctest.h"

using namespace coop::simd;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo = -3, double hi = 3) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Reductions are allowed to reassociate; bound by n * eps * sum |terms|.
double reduction_tolerance(const std::vector<double>& terms) {
  double mag = 0.0;
  for (double t : terms) mag += std::abs(t);
  return 4.0 * static_cast<double>(terms.size() + 1) * std::numeric_limits<double>::epsilon() * mag;
}

}  // namespace

TEST_CASE("scalar reference kernels compute their definitions") {
  const auto& k = scalar_kernels();
  std::vector<double> x{1, -2, 3.5}, y{4, 5, -6}, out(3);
  k.axpby(2.0, x.data(), -1.0, y.data(), out.data(), 3);
  CHECK(out == std::vector<double>{-2, -9, 13});
  k.axpy(0.5, x.data(), y.data(), 3);
  CHECK(y == std::vector<double>{4.5, 4, -4.25});
  k.shift_scale(x.data(), 1.0, 2.0, out.data(), 3);
  CHECK(out == std::vector<double>{4, -2, 9});
  k.fill(7.0, out.data(), 3);
  CHECK(out == std::vector<double>{7, 7, 7});
  CHECK(k.max_abs(x.data(), 3) == 3.5);
  CHECK(k.max_abs(x.data(), 0) == 0.0);
  CHECK(k.dot(x.data(), x.data(), 3) == doctest::Approx(1 + 4 + 12.25));
  CHECK(k.sum(x.data(), 3) == doctest::Approx(2.5));
  CHECK(k.sum(x.data(), 0) == 0.0);
}

TEST_CASE("scalar puct_argmax: unvisited exploit is zero, ties go low") {
  const auto& k = scalar_kernels();
  std::vector<double> prior{0.25, 0.25, 0.5};
  std::vector<double> value{0, 0, 0};
  std::vector<std::uint32_t> visits{0, 0, 0};
  PuctInputs in{prior, value, visits, 1.0, 0.0, true};
  CHECK(k.puct_argmax(in) == 0);  // all scores zero
  in.sqrt_parent_visits = 1.0;
  CHECK(k.puct_argmax(in) == 2);
  value = {0.9, 0, 0};
  visits = {1, 0, 0};
  // 0.9 + 0.125 vs 0.25 vs 0.5
  CHECK(k.puct_argmax(in) == 0);
  in.value_is_sum = false;
  value = {0.2, 0.6, 0.0};
  visits = {3, 3, 0};
  in.c_puct = 0.0;
  CHECK(k.puct_argmax(in) == 1);
}

TEST_CASE("AVX2 variants match the scalar reference") {
  const KernelTable* v = avx2_kernels();
  if (!v) {
    MESSAGE("AVX2 variant unavailable on this machine; equivalence not exercised");
    return;
  }
  const auto& s = scalar_kernels();
  std::mt19937_64 rng(12345);

  for (std::size_t n = 0; n <= 67; ++n) {
    const auto x = random_vec(rng, n);
    const auto y = random_vec(rng, n);
    const double a = 1.7, b = -0.3;

    std::vector<double> o1(n), o2(n);
    s.axpby(a, x.data(), b, y.data(), o1.data(), n);
    v->axpby(a, x.data(), b, y.data(), o2.data(), n);
    CHECK(o1 == o2);

    auto y1 = y, y2 = y;
    s.axpy(a, x.data(), y1.data(), n);
    v->axpy(a, x.data(), y2.data(), n);
    CHECK(y1 == y2);

    s.shift_scale(x.data(), -0.4, 2.5, o1.data(), n);
    v->shift_scale(x.data(), -0.4, 2.5, o2.data(), n);
    CHECK(o1 == o2);

    s.fill(0.125, o1.data(), n);
    v->fill(0.125, o2.data(), n);
    CHECK(o1 == o2);

    CHECK(s.max_abs(x.data(), n) == v->max_abs(x.data(), n));

    std::vector<double> prods(n);
    for (std::size_t i = 0; i < n; ++i) prods[i] = x[i] * y[i];
    CHECK(std::abs(s.dot(x.data(), y.data(), n) - v->dot(x.data(), y.data(), n)) <=
          reduction_tolerance(prods));
    CHECK(std::abs(s.sum(x.data(), n) - v->sum(x.data(), n)) <= reduction_tolerance(x));
  }
}

TEST_CASE("AVX2 puct_argmax matches scalar, including ties and unvisited children") {
  const KernelTable* v = avx2_kernels();
  if (!v) {
    MESSAGE("AVX2 variant unavailable on this machine; equivalence not exercised");
    return;
  }
  const auto& s = scalar_kernels();
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> visits_d(0, 6);
  std::uniform_int_distribution<int> coarse(0, 3);

  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 41);
    std::vector<double> prior(n), value(n);
    std::vector<std::uint32_t> visits(n);
    const bool coarse_values = trial % 3 == 0;  // forces exact ties
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      prior[i] = coarse_values ? 1.0 + coarse(rng) : 0.01 + std::uniform_real_distribution<>(0, 1)(rng);
      z += prior[i];
      visits[i] = static_cast<std::uint32_t>(visits_d(rng));
      value[i] = coarse_values ? 0.25 * coarse(rng) * visits[i]
                               : std::uniform_real_distribution<>(0, 1)(rng) * visits[i];
    }
    for (auto& p : prior) p /= z;
    for (bool sums : {true, false}) {
      for (double c : {0.0, 1.0, 3.0}) {
        PuctInputs in{prior, value, visits, c, std::sqrt(static_cast<double>(trial % 17)), sums};
        REQUIRE(s.puct_argmax(in) == v->puct_argmax(in));
      }
    }
  }
}

TEST_CASE("dispatch honours set_active_isa") {
  const Isa before = active_isa();
  CHECK(set_active_isa(Isa::scalar));
  CHECK(active_isa() == Isa::scalar);
  CHECK(&kernels() == &scalar_kernels());
  if (avx2_kernels()) {
    CHECK(set_active_isa(Isa::avx2));
    CHECK(active_isa() == Isa::avx2);
  } else {
    CHECK_FALSE(set_active_isa(Isa::avx2));
  }
  set_active_isa(before);
  CHECK(isa_name(Isa::scalar) == "scalar");
  CHECK(isa_name(Isa::avx2) == "avx2");
}
