#include "umc/simd/kernels.hpp"

#include <cmath>

namespace umc::simd {
namespace {

void gemm_scalar(Transpose trans_a, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc,
                 bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a == Transpose::no ? a[i * lda + p] : a[p * lda + i];
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void elu_scalar(std::size_t n, const double* z, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = z[i] >= 0.0 ? z[i] : std::expm1(z[i]);
}

void elu_backward_scalar(std::size_t n, const double* z, const double* act, const double* grad,
                         double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = z[i] >= 0.0 ? grad[i] : grad[i] * (act[i] + 1.0);
}

void exp_scalar(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] < -708.0 ? 0.0 : std::exp(x[i]);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar",   gemm_scalar, dot_scalar,         axpy_scalar,
                                 elu_scalar, elu_backward_scalar, exp_scalar};
  return table;
}

}  // namespace umc::simd
