// AVX2 + FMA variants. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here may be called before dispatch has confirmed CPU
// support.

#include <immintrin.h>

#include "umc/simd/kernels.hpp"

namespace umc::simd {
namespace {

inline __m256i tail_mask(std::size_t rem) {
  return _mm256_setr_epi64x(rem > 0 ? -1 : 0, rem > 1 ? -1 : 0, rem > 2 ? -1 : 0, 0);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// exp by Cody-Waite reduction with ln 2 and a division-free polynomial.
// Within a few ulp on [-708, 709]; NaN propagates.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(hi, _mm256_max_pd(lo, x));

  const __m256d fx =
      _mm256_floor_pd(_mm256_fmadd_pd(x, _mm256_set1_pd(1.4426950408889634073599), _mm256_set1_pd(0.5)));
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125E-1), x);
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6), x);

  // Taylor series to degree 13 on |x| <= ln2/2 (truncation error < 1e-17),
  // evaluated by Estrin's scheme to keep the dependency chain short.
  auto pair = [&](double a, double b) { return _mm256_fmadd_pd(_mm256_set1_pd(b), x, _mm256_set1_pd(a)); };
  const __m256d x2 = _mm256_mul_pd(x, x);
  const __m256d x4 = _mm256_mul_pd(x2, x2);
  const __m256d x8 = _mm256_mul_pd(x4, x4);
  const __m256d q0 = pair(1.0, 1.0);
  const __m256d q1 = pair(1.0 / 2, 1.0 / 6);
  const __m256d q2 = pair(1.0 / 24, 1.0 / 120);
  const __m256d q3 = pair(1.0 / 720, 1.0 / 5040);
  const __m256d q4 = pair(1.0 / 40320, 1.0 / 362880);
  const __m256d q5 = pair(1.0 / 3628800, 1.0 / 39916800);
  const __m256d q6 = pair(1.0 / 479001600, 1.0 / 6227020800);
  const __m256d r0 = _mm256_fmadd_pd(q1, x2, q0);
  const __m256d r1 = _mm256_fmadd_pd(q3, x2, q2);
  const __m256d r2 = _mm256_fmadd_pd(q5, x2, q4);
  const __m256d s0 = _mm256_fmadd_pd(r1, x4, r0);
  const __m256d s1 = _mm256_fmadd_pd(q6, x4, r2);
  __m256d r = _mm256_fmadd_pd(s1, x8, s0);

  const __m128i n32 = _mm256_cvtpd_epi32(fx);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(n64));
  return _mm256_andnot_pd(under, r);
}

template <Transpose TA>
inline double a_at(const double* a, std::size_t lda, std::size_t i, std::size_t p) {
  if constexpr (TA == Transpose::no)
    return a[i * lda + p];
  else
    return a[p * lda + i];
}

template <Transpose TA, int MR>
void gemm_rows(std::size_t i0, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d acc0[MR], acc1[MR];
    for (int r = 0; r < MR; ++r) acc0[r] = acc1[r] = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * ldb + j;
      const __m256d b0 = _mm256_loadu_pd(brow);
      const __m256d b1 = _mm256_loadu_pd(brow + 4);
      for (int r = 0; r < MR; ++r) {
        const __m256d av = _mm256_set1_pd(a_at<TA>(a, lda, i0 + r, p));
        acc0[r] = _mm256_fmadd_pd(av, b0, acc0[r]);
        acc1[r] = _mm256_fmadd_pd(av, b1, acc1[r]);
      }
    }
    for (int r = 0; r < MR; ++r) {
      double* crow = c + (i0 + r) * ldc + j;
      if (accumulate) {
        acc0[r] = _mm256_add_pd(acc0[r], _mm256_loadu_pd(crow));
        acc1[r] = _mm256_add_pd(acc1[r], _mm256_loadu_pd(crow + 4));
      }
      _mm256_storeu_pd(crow, acc0[r]);
      _mm256_storeu_pd(crow + 4, acc1[r]);
    }
  }
  while (j < n) {
    const std::size_t width = n - j >= 4 ? 4 : n - j;
    const __m256i mask = width == 4 ? _mm256_set1_epi64x(-1) : tail_mask(width);
    __m256d acc[MR];
    for (int r = 0; r < MR; ++r) acc[r] = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d bv = _mm256_maskload_pd(b + p * ldb + j, mask);
      for (int r = 0; r < MR; ++r)
        acc[r] = _mm256_fmadd_pd(_mm256_set1_pd(a_at<TA>(a, lda, i0 + r, p)), bv, acc[r]);
    }
    for (int r = 0; r < MR; ++r) {
      double* crow = c + (i0 + r) * ldc + j;
      if (accumulate) acc[r] = _mm256_add_pd(acc[r], _mm256_maskload_pd(crow, mask));
      _mm256_maskstore_pd(crow, mask, acc[r]);
    }
    j += width;
  }
}

template <Transpose TA>
void gemm_impl(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_rows<TA, 4>(i, n, k, a, lda, b, ldb, c, ldc, accumulate);
  switch (m - i) {
    case 3: gemm_rows<TA, 3>(i, n, k, a, lda, b, ldb, c, ldc, accumulate); break;
    case 2: gemm_rows<TA, 2>(i, n, k, a, lda, b, ldb, c, ldc, accumulate); break;
    case 1: gemm_rows<TA, 1>(i, n, k, a, lda, b, ldb, c, ldc, accumulate); break;
    default: break;
  }
}

void gemm_avx2(Transpose trans_a, std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc,
               bool accumulate) {
  if (trans_a == Transpose::no)
    gemm_impl<Transpose::no>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  else
    gemm_impl<Transpose::yes>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4)
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void elu_avx2(std::size_t n, const double* z, double* out) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i < n; i += 4) {
    const std::size_t width = n - i >= 4 ? 4 : n - i;
    const __m256i mask = width == 4 ? _mm256_set1_epi64x(-1) : tail_mask(width);
    const __m256d v = _mm256_maskload_pd(z + i, mask);
    const __m256d neg = _mm256_sub_pd(exp_pd(_mm256_min_pd(zero, v)), one);
    const __m256d ge = _mm256_cmp_pd(v, zero, _CMP_GE_OQ);
    _mm256_maskstore_pd(out + i, mask, _mm256_blendv_pd(neg, v, ge));
  }
}

void elu_backward_avx2(std::size_t n, const double* z, const double* act, const double* grad,
                       double* out) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  for (std::size_t i = 0; i < n; i += 4) {
    const std::size_t width = n - i >= 4 ? 4 : n - i;
    const __m256i mask = width == 4 ? _mm256_set1_epi64x(-1) : tail_mask(width);
    const __m256d zv = _mm256_maskload_pd(z + i, mask);
    const __m256d gv = _mm256_maskload_pd(grad + i, mask);
    const __m256d av = _mm256_maskload_pd(act + i, mask);
    const __m256d neg = _mm256_mul_pd(gv, _mm256_add_pd(av, one));
    const __m256d ge = _mm256_cmp_pd(zv, zero, _CMP_GE_OQ);
    _mm256_maskstore_pd(out + i, mask, _mm256_blendv_pd(neg, gv, ge));
  }
}

void exp_avx2(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; i += 4) {
    const std::size_t width = n - i >= 4 ? 4 : n - i;
    const __m256i mask = width == 4 ? _mm256_set1_epi64x(-1) : tail_mask(width);
    _mm256_maskstore_pd(out + i, mask, exp_pd(_mm256_maskload_pd(x + i, mask)));
  }
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{"avx2",   gemm_avx2, dot_avx2,         axpy_avx2,
                                 elu_avx2, elu_backward_avx2, exp_avx2};
  return table;
}

}  // namespace umc::simd
