#include <atomic>
#include <cstdlib>
#include <string_view>

#include "umc/error.hpp"
#include "umc/simd/kernels.hpp"

namespace umc::simd {

#if defined(UMC_HAVE_AVX2_KERNELS)
const KernelTable& avx2_kernel_table();
#endif

namespace {

bool cpu_supports_avx2() {
#if defined(UMC_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("UMC_SIMD"); env && std::string_view(env) == "scalar")
    return &scalar_kernels();
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(UMC_HAVE_AVX2_KERNELS)
  static const bool supported = cpu_supports_avx2();
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& kernels() { return *active_slot().load(std::memory_order_acquire); }

Backend active_backend() {
  return &kernels() == &scalar_kernels() ? Backend::scalar : Backend::avx2;
}

void set_backend(Backend backend) {
  if (backend == Backend::scalar) {
    active_slot().store(&scalar_kernels(), std::memory_order_release);
    return;
  }
  const KernelTable* t = avx2_kernels();
  if (!t) throw ConfigError("AVX2 kernels are not available on this machine");
  active_slot().store(t, std::memory_order_release);
}

}  // namespace umc::simd
