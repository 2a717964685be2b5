#include "baryflow/simd/kernels.hpp"

#include <cmath>

namespace baryflow::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

void gaussian_row_scalar(SoaView pts, const double* center, double neg_inv_2a2, double scale,
                         double* out) {
  for (std::size_t k = 0; k < pts.n; ++k) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < pts.d; ++j) {
      const double t = pts.col(j)[k] - center[j];
      r2 += t * t;
    }
    out[k] = scale * std::exp(neg_inv_2a2 * r2);
  }
}

void gaussian_moments_scalar(SoaView pts, const double* center, const double* weights,
                             double neg_inv_2a2, bool second_order, Moments& out) {
  const std::size_t d = pts.d;
  out = Moments{};
  double diff[kMaxVectorDim];
  for (std::size_t k = 0; k < pts.n; ++k) {
    if (weights[k] == 0.0) continue;
    double r2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      diff[j] = pts.col(j)[k] - center[j];
      r2 += diff[j] * diff[j];
    }
    const double e = weights[k] * std::exp(neg_inv_2a2 * r2);
    out.s0 += e;
    for (std::size_t j = 0; j < d; ++j) {
      out.s1[j] += e * diff[j];
      if (!second_order) continue;
      for (std::size_t l = j; l < d; ++l) out.s2[j * d + l] += e * diff[j] * diff[l];
    }
  }
  if (second_order)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t l = 0; l < j; ++l) out.s2[j * d + l] = out.s2[l * d + j];
}

void exp_scalar(const double* in, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = std::exp(in[k]);
}

constexpr KernelTable kScalar{Isa::Scalar, dot_scalar, gaussian_row_scalar,
                              gaussian_moments_scalar, exp_scalar};

}  // namespace

const KernelTable& detail::scalar_table() { return kScalar; }

}  // namespace baryflow::simd
