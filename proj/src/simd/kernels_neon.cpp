// NEON (aarch64) variants, two doubles per lane group. Advanced SIMD is
// mandatory on aarch64, so no runtime probe is needed beyond the build check.

#include "baryflow/simd/kernels.hpp"

#include <arm_neon.h>

#include <cmath>

namespace baryflow::simd {
namespace {

inline double hsum(float64x2_t v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }

// Same reduction and polynomial as the AVX2 path.
inline float64x2_t exp_pd(float64x2_t x) {
  const float64x2_t lo_limit = vdupq_n_f64(-708.39);
  const float64x2_t hi_limit = vdupq_n_f64(709.78);
  const uint64x2_t underflow = vcltq_f64(x, lo_limit);
  const uint64x2_t overflow = vcgtq_f64(x, hi_limit);
  const uint64x2_t is_num = vceqq_f64(x, x);
  const float64x2_t input = x;
  x = vmaxq_f64(vminq_f64(x, hi_limit), lo_limit);

  const float64x2_t n = vrndnq_f64(vmulq_f64(x, vdupq_n_f64(1.4426950408889634)));
  float64x2_t r = vfmsq_f64(x, n, vdupq_n_f64(6.93147180369123816490e-01));
  r = vfmsq_f64(r, n, vdupq_n_f64(1.90821492927058770002e-10));

  static constexpr double kCoeff[] = {1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
                                      1.0 / 362880.0,    1.0 / 40320.0,    1.0 / 5040.0,
                                      1.0 / 720.0,       1.0 / 120.0,      1.0 / 24.0,
                                      1.0 / 6.0,         0.5,              1.0,
                                      1.0};
  float64x2_t p = vdupq_n_f64(1.0 / 6227020800.0);
  for (double c : kCoeff) p = vfmaq_f64(vdupq_n_f64(c), p, r);

  int64x2_t bits = vaddq_s64(vcvtq_s64_f64(n), vdupq_n_s64(1023));
  bits = vshlq_n_s64(bits, 52);
  float64x2_t result = vmulq_f64(p, vreinterpretq_f64_s64(bits));

  result = vbslq_f64(underflow, vdupq_n_f64(0.0), result);
  result = vbslq_f64(overflow, vdupq_n_f64(HUGE_VAL), result);
  return vbslq_f64(is_num, result, input);
}

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + k), vld1q_f64(b + k));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + k + 2), vld1q_f64(b + k + 2));
  }
  for (; k + 2 <= n; k += 2) acc0 = vfmaq_f64(acc0, vld1q_f64(a + k), vld1q_f64(b + k));
  double s = hsum(vaddq_f64(acc0, acc1));
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline float64x2_t sq_dist(SoaView pts, const double* center, std::size_t k, float64x2_t* diff) {
  float64x2_t r2 = vdupq_n_f64(0.0);
  for (std::size_t j = 0; j < pts.d; ++j) {
    const float64x2_t t = vsubq_f64(vld1q_f64(pts.col(j) + k), vdupq_n_f64(center[j]));
    if (diff) diff[j] = t;
    r2 = vfmaq_f64(r2, t, t);
  }
  return r2;
}

void gaussian_row_neon(SoaView pts, const double* center, double neg_inv_2a2, double scale,
                       double* out) {
  const float64x2_t s = vdupq_n_f64(neg_inv_2a2);
  std::size_t k = 0;
  for (; k + 2 <= pts.n; k += 2) {
    const float64x2_t r2 = sq_dist(pts, center, k, nullptr);
    vst1q_f64(out + k, vmulq_n_f64(exp_pd(vmulq_f64(s, r2)), scale));
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

void gaussian_moments_neon(SoaView pts, const double* center, const double* weights,
                           double neg_inv_2a2, bool second_order, Moments& out) {
  const std::size_t d = pts.d;
  const float64x2_t s = vdupq_n_f64(neg_inv_2a2);
  float64x2_t a0 = vdupq_n_f64(0.0);
  float64x2_t a1[kMaxVectorDim];
  float64x2_t a2[kMaxVectorDim * kMaxVectorDim];
  for (std::size_t j = 0; j < d; ++j) a1[j] = vdupq_n_f64(0.0);
  for (std::size_t j = 0; j < d * d; ++j) a2[j] = vdupq_n_f64(0.0);
  float64x2_t diff[kMaxVectorDim];

  std::size_t k = 0;
  for (; k + 2 <= pts.n; k += 2) {
    const float64x2_t r2 = sq_dist(pts, center, k, diff);
    const float64x2_t e = vmulq_f64(vld1q_f64(weights + k), exp_pd(vmulq_f64(s, r2)));
    a0 = vaddq_f64(a0, e);
    for (std::size_t j = 0; j < d; ++j) {
      a1[j] = vfmaq_f64(a1[j], e, diff[j]);
      if (!second_order) continue;
      const float64x2_t ej = vmulq_f64(e, diff[j]);
      for (std::size_t l = j; l < d; ++l) a2[j * d + l] = vfmaq_f64(a2[j * d + l], ej, diff[l]);
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

void exp_neon(const double* in, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) vst1q_f64(out + k, exp_pd(vld1q_f64(in + k)));
  for (; k < n; ++k) out[k] = std::exp(in[k]);
}

constexpr KernelTable kNeon{Isa::Neon, dot_neon, gaussian_row_neon, gaussian_moments_neon,
                            exp_neon};

}  // namespace

const KernelTable* detail::neon_table() { return &kNeon; }

}  // namespace baryflow::simd
