#pragma once

// Data-parallel inner loops shared by the coupling and objective code.
//
// Every kernel has a scalar reference implementation; vectorized variants
// (AVX2+FMA on x86-64, NEON on aarch64) are selected once at runtime from the
// CPU features. The BARYFLOW_SIMD environment variable ("scalar", "avx2",
// "neon") overrides the choice. Variants agree with the reference to a few
// ulps, not bitwise: the vector exp and the lane-wise reduction order differ.

#include <cstddef>
#include <string_view>

namespace baryflow::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

/// Largest point dimension handled by the vector moment kernels. Wider points
/// fall through to the scalar path.
inline constexpr std::size_t kMaxVectorDim = 8;

/// Column-major view of n points in d dimensions: coordinate j of point k is
/// data[j * n + k].
struct SoaView {
  const double* data;
  std::size_t n;
  std::size_t d;

  const double* col(std::size_t j) const { return data + j * n; }
};

/// Weighted Gaussian moments around a center c, with e_k = w_k exp(s |p_k - c|^2):
///   s0 = sum e_k,  s1[j] = sum e_k (p_kj - c_j),
///   s2[j*d + l] = sum e_k (p_kj - c_j)(p_kl - c_l)  (only when requested).
struct Moments {
  double s0 = 0.0;
  double s1[kMaxVectorDim] = {};
  double s2[kMaxVectorDim * kMaxVectorDim] = {};
};

struct KernelTable {
  Isa isa;
  /// sum_k a[k] * b[k]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// out[k] = scale * exp(neg_inv_2a2 * |p_k - center|^2)
  void (*gaussian_row)(SoaView pts, const double* center, double neg_inv_2a2, double scale,
                       double* out);
  /// Moments above, with s = neg_inv_2a2. Requires pts.d <= kMaxVectorDim.
  void (*gaussian_moments)(SoaView pts, const double* center, const double* weights,
                           double neg_inv_2a2, bool second_order, Moments& out);
  /// out[k] = exp(in[k])
  void (*exp)(const double* in, double* out, std::size_t n);
};

bool isa_supported(Isa isa);

/// Table for a specific instruction set; throws InvalidInput if the CPU or
/// the build lacks it.
const KernelTable& kernels(Isa isa);

/// Table currently in use (detected on first call unless overridden).
const KernelTable& kernels();

/// Forces the active table. Intended for tests and benchmarking.
void set_active_isa(Isa isa);

Isa detect_best_isa();

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

}  // namespace baryflow::simd
