#pragma once

// Data-parallel inner loops used by the neural calibrator. Every kernel has a
// portable scalar reference; vectorized variants are selected once at runtime
// from the CPU feature set and must agree with the reference to rounding.

#include <cstddef>
#include <string_view>

namespace umc::simd {

enum class Transpose { no, yes };

/// C[m x n] = (accumulate ? C : 0) + op(A) * B.
/// op(A) = A with A stored m x k (row stride lda), or A^T with A stored k x m.
/// B is k x n row-major with row stride ldb.
using GemmFn = void (*)(Transpose trans_a, std::size_t m, std::size_t n, std::size_t k,
                        const double* a, std::size_t lda, const double* b, std::size_t ldb,
                        double* c, std::size_t ldc, bool accumulate);

struct KernelTable {
  std::string_view name;
  GemmFn gemm;
  /// sum_i x[i] * y[i]
  double (*dot)(std::size_t n, const double* x, const double* y);
  /// y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  /// out = elu(z), alpha = 1
  void (*elu)(std::size_t n, const double* z, double* out);
  /// out = grad * elu'(z), using act = elu(z) for the negative branch
  void (*elu_backward)(std::size_t n, const double* z, const double* act, const double* grad,
                       double* out);
  /// out = exp(x); inputs below -708 flush to zero
  void (*exp)(std::size_t n, const double* x, double* out);
};

enum class Backend { scalar, avx2 };

const KernelTable& scalar_kernels();

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

/// The table in use. Chosen on first call: AVX2 when available, unless the
/// environment variable UMC_SIMD=scalar forces the reference path.
const KernelTable& kernels();

Backend active_backend();

/// Force a backend. Throws ConfigError if the requested one is unavailable.
void set_backend(Backend backend);

}  // namespace umc::simd
