#include "baryflow/simd/kernels.hpp"

#include "baryflow/types.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace baryflow::simd {

#if !defined(BARYFLOW_HAVE_AVX2)
const KernelTable* detail::avx2_table() { return nullptr; }
#endif
#if !defined(BARYFLOW_HAVE_NEON)
const KernelTable* detail::neon_table() { return nullptr; }
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(BARYFLOW_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon: return detail::neon_table() != nullptr;
  }
  return false;
}

const KernelTable& kernels(Isa isa) {
  if (!isa_supported(isa))
    throw InvalidInput("instruction set '" + std::string(isa_name(isa)) + "' is not available");
  switch (isa) {
    case Isa::Avx2: return *detail::avx2_table();
    case Isa::Neon: return *detail::neon_table();
    case Isa::Scalar: break;
  }
  return detail::scalar_table();
}

Isa detect_best_isa() {
  if (const char* env = std::getenv("BARYFLOW_SIMD")) {
    const std::string_view want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon})
      if (want == isa_name(isa) && isa_supported(isa)) return isa;
  }
  if (isa_supported(Isa::Avx2)) return Isa::Avx2;
  if (isa_supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

namespace {
std::atomic<const KernelTable*> g_active{nullptr};
}

const KernelTable& kernels() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    t = &kernels(detect_best_isa());
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void set_active_isa(Isa isa) { g_active.store(&kernels(isa), std::memory_order_release); }

}  // namespace baryflow::simd
