// Compiled with -mavx2 (and without FMA) only; never called unless the CPU
// reports AVX2 at runtime.
#include <immintrin.h>

#include <limits>

#include "simd_common.hpp"

namespace anneal::simd {
namespace {

using detail::combine;
using detail::exp_ref;

inline __m256d exp_vec(__m256d x) noexcept {
  const __m256d lo = _mm256_set1_pd(kExpLow);
  const __m256d hi = _mm256_set1_pd(kExpHigh);
  const __m256d is_nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  const __m256d over = _mm256_cmp_pd(x, hi, _CMP_GT_OQ);
  // Keep the polynomial path finite; out-of-range lanes are patched below.
  const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(detail::kLog2e)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_sub_pd(xc, _mm256_mul_pd(n, _mm256_set1_pd(detail::kLn2Hi)));
  r = _mm256_sub_pd(r, _mm256_mul_pd(n, _mm256_set1_pd(detail::kLn2Lo)));
  __m256d p = _mm256_set1_pd(detail::kExpPoly[0]);
  for (int k = 1; k < 11; ++k) {
    p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(detail::kExpPoly[k]));
  }
  const __m256d one = _mm256_set1_pd(1.0);
  p = _mm256_add_pd(_mm256_mul_pd(p, r), one);
  p = _mm256_add_pd(_mm256_mul_pd(p, r), one);

  // 2^(n-1): n - 1 + 1023 is an integer in [1, 2046]; adding 2^52 puts it in
  // the low mantissa bits, which are then shifted into the exponent field.
  const __m256d biased = _mm256_add_pd(_mm256_add_pd(n, _mm256_set1_pd(1022.0)),
                                       _mm256_set1_pd(0x1.0p52));
  const __m256i bits = _mm256_slli_epi64(
      _mm256_sub_epi64(_mm256_castpd_si256(biased), _mm256_castpd_si256(_mm256_set1_pd(0x1.0p52))),
      52);
  __m256d res = _mm256_mul_pd(_mm256_mul_pd(p, _mm256_castsi256_pd(bits)), _mm256_set1_pd(2.0));

  res = _mm256_blendv_pd(res, _mm256_setzero_pd(), under);
  res = _mm256_blendv_pd(res, _mm256_set1_pd(std::numeric_limits<double>::infinity()), over);
  res = _mm256_blendv_pd(res, x, is_nan);
  return res;
}

double max_avx2(const double* x, std::size_t n) noexcept {
  __m256d m = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_loadu_pd(x + i);
    m = _mm256_blendv_pd(m, v, _mm256_cmp_pd(v, m, _CMP_GT_OQ));
  }
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, m);
  for (; i < n; ++i) {
    double& l = lanes[i % kLanes];
    if (x[i] > l) l = x[i];
  }
  const double a = lanes[1] > lanes[0] ? lanes[1] : lanes[0];
  const double b = lanes[3] > lanes[2] ? lanes[3] : lanes[2];
  return b > a ? b : a;
}

double sum_exp_avx2(const double* x, std::size_t n, double scale, double shift) noexcept {
  const __m256d vs = _mm256_set1_pd(scale);
  const __m256d vh = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_sub_pd(_mm256_mul_pd(vs, _mm256_loadu_pd(x + i)), vh);
    acc = _mm256_add_pd(acc, exp_vec(v));
  }
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, acc);
  for (; i < n; ++i) lanes[i % kLanes] += exp_ref(scale * x[i] - shift);
  return combine(lanes);
}

double sum_avx2(const double* x, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, acc);
  for (; i < n; ++i) lanes[i % kLanes] += x[i];
  return combine(lanes);
}

double dot_avx2(const double* x, const double* y, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, acc);
  for (; i < n; ++i) lanes[i % kLanes] += x[i] * y[i];
  return combine(lanes);
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) noexcept {
  if (a == 0.0) return;
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, v);
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void exp_shifted_avx2(const double* x, double shift, double* out, std::size_t n) noexcept {
  const __m256d vh = _mm256_set1_pd(shift);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, exp_vec(_mm256_sub_pd(_mm256_loadu_pd(x + i), vh)));
  }
  for (; i < n; ++i) out[i] = exp_ref(x[i] - shift);
}

void affine_avx2(double a, double b, const double* x, double* y, std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(y + i, _mm256_add_pd(va, _mm256_mul_pd(vb, _mm256_loadu_pd(x + i))));
  }
  for (; i < n; ++i) y[i] = a + b * x[i];
}

}  // namespace

namespace detail {
extern const KernelTable kAvx2Table;
const KernelTable kAvx2Table{max_avx2,  sum_exp_avx2,     sum_avx2,   dot_avx2,
                             axpy_avx2, exp_shifted_avx2, affine_avx2};
}  // namespace detail

}  // namespace anneal::simd
