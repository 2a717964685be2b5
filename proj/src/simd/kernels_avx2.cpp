// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after dispatch has confirmed CPU support.

#include "baryflow/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace baryflow::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp via x = n ln2 + r, |r| <= ln2/2, degree-13 Taylor polynomial for e^r and
// exponent-field scaling for 2^n. Max relative error ~2 ulp on [-708, 709].
inline __m256d exp_pd(__m256d x) {
  const __m256d lo_limit = _mm256_set1_pd(-708.39);
  const __m256d hi_limit = _mm256_set1_pd(709.78);
  const __m256d underflow = _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ);
  const __m256d overflow = _mm256_cmp_pd(x, hi_limit, _CMP_GT_OQ);
  const __m256d nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d input = x;
  x = _mm256_max_pd(_mm256_min_pd(x, hi_limit), lo_limit);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);

  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  const __m128i ni = _mm256_cvtpd_epi32(n);
  __m256i bits = _mm256_add_epi64(_mm256_cvtepi32_epi64(ni), _mm256_set1_epi64x(1023));
  bits = _mm256_slli_epi64(bits, 52);
  __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));

  result = _mm256_andnot_pd(underflow, result);
  result = _mm256_blendv_pd(result, _mm256_set1_pd(HUGE_VAL), overflow);
  return _mm256_blendv_pd(result, input, nan);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4), acc1);
  }
  for (; k + 4 <= n; k += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline __m256d sq_dist(SoaView pts, const double* center, std::size_t k, __m256d* diff) {
  __m256d r2 = _mm256_setzero_pd();
  for (std::size_t j = 0; j < pts.d; ++j) {
    const __m256d t = _mm256_sub_pd(_mm256_loadu_pd(pts.col(j) + k), _mm256_set1_pd(center[j]));
    if (diff) diff[j] = t;
    r2 = _mm256_fmadd_pd(t, t, r2);
  }
  return r2;
}

void gaussian_row_avx2(SoaView pts, const double* center, double neg_inv_2a2, double scale,
                       double* out) {
  const __m256d s = _mm256_set1_pd(neg_inv_2a2);
  const __m256d sc = _mm256_set1_pd(scale);
  std::size_t k = 0;
  for (; k + 4 <= pts.n; k += 4) {
    const __m256d r2 = sq_dist(pts, center, k, nullptr);
    _mm256_storeu_pd(out + k, _mm256_mul_pd(sc, exp_pd(_mm256_mul_pd(s, r2))));
  }
  for (; k < pts.n; ++k) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < pts.d; ++j) {
      const double t = pts.col(j)[k] - center[j];
      r2 += t * t;
    }
    out[k] = scale * std::exp(neg_inv_2a2 * r2);
  }
}

void gaussian_moments_avx2(SoaView pts, const double* center, const double* weights,
                           double neg_inv_2a2, bool second_order, Moments& out) {
  const std::size_t d = pts.d;
  const __m256d s = _mm256_set1_pd(neg_inv_2a2);
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1[kMaxVectorDim];
  __m256d a2[kMaxVectorDim * kMaxVectorDim];
  for (std::size_t j = 0; j < d; ++j) a1[j] = _mm256_setzero_pd();
  for (std::size_t j = 0; j < d * d; ++j) a2[j] = _mm256_setzero_pd();
  __m256d diff[kMaxVectorDim];

  std::size_t k = 0;
  for (; k + 4 <= pts.n; k += 4) {
    const __m256d r2 = sq_dist(pts, center, k, diff);
    const __m256d e = _mm256_mul_pd(_mm256_loadu_pd(weights + k), exp_pd(_mm256_mul_pd(s, r2)));
    a0 = _mm256_add_pd(a0, e);
    for (std::size_t j = 0; j < d; ++j) {
      a1[j] = _mm256_fmadd_pd(e, diff[j], a1[j]);
      if (!second_order) continue;
      const __m256d ej = _mm256_mul_pd(e, diff[j]);
      for (std::size_t l = j; l < d; ++l) a2[j * d + l] = _mm256_fmadd_pd(ej, diff[l], a2[j * d + l]);
    }
  }

  out = Moments{};
  out.s0 = hsum(a0);
  for (std::size_t j = 0; j < d; ++j) {
    out.s1[j] = hsum(a1[j]);
    if (second_order)
      for (std::size_t l = j; l < d; ++l) out.s2[j * d + l] = hsum(a2[j * d + l]);
  }

  double dk[kMaxVectorDim];
  for (; k < pts.n; ++k) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dk[j] = pts.col(j)[k] - center[j];
      r2 += dk[j] * dk[j];
    }
    const double e = weights[k] * std::exp(neg_inv_2a2 * r2);
    out.s0 += e;
    for (std::size_t j = 0; j < d; ++j) {
      out.s1[j] += e * dk[j];
      if (!second_order) continue;
      for (std::size_t l = j; l < d; ++l) out.s2[j * d + l] += e * dk[j] * dk[l];
    }
  }
  if (second_order)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t l = 0; l < j; ++l) out.s2[j * d + l] = out.s2[l * d + j];
}

void exp_avx2(const double* in, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) _mm256_storeu_pd(out + k, exp_pd(_mm256_loadu_pd(in + k)));
  for (; k < n; ++k) out[k] = std::exp(in[k]);
}

constexpr KernelTable kAvx2{Isa::Avx2, dot_avx2, gaussian_row_avx2, gaussian_moments_avx2,
                            exp_avx2};

}  // namespace

const KernelTable* detail::avx2_table() { return &kAvx2; }

}  // namespace baryflow::simd
