#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "umc/error.hpp"
#include "umc/simd/kernels.hpp"

using namespace umc::simd;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -3.0, double hi = 3.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Textbook triple loop; independent of both kernel tables.
void naive_gemm(Transpose ta, std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                const double* b, std::size_t ldb, double* c, std::size_t ldc, bool acc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double sum = acc ? c[i * ldc + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta == Transpose::no ? a[i * lda + p] : a[p * lda + i];
        sum += av * b[p * ldb + j];
      }
      c[i * ldc + j] = sum;
    }
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<const KernelTable*> tables() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (avx2_kernels()) out.push_back(avx2_kernels());
  return out;
}

}  // namespace

TEST_CASE("gemm matches the naive product for every shape and transpose") {
  std::mt19937_64 rng(3);
  const std::size_t dims[] = {1, 3, 4, 5, 7, 8, 9, 13, 17, 50};
  for (const KernelTable* kt : tables()) {
    CAPTURE(kt->name);
    for (std::size_t m : dims)
      for (std::size_t n : dims)
        for (std::size_t k : {std::size_t{1}, std::size_t{6}, std::size_t{50}})
          for (Transpose ta : {Transpose::no, Transpose::yes})
            for (bool acc : {false, true}) {
              const std::size_t lda = (ta == Transpose::no ? k : m) + 2;
              const std::size_t ldb = n + 1, ldc = n + 3;
              const auto a = random_vector((ta == Transpose::no ? m : k) * lda, rng);
              const auto b = random_vector(k * ldb, rng);
              auto c = random_vector(m * ldc, rng);
              auto expect = c;
              naive_gemm(ta, m, n, k, a.data(), lda, b.data(), ldb, expect.data(), ldc, acc);
              kt->gemm(ta, m, n, k, a.data(), lda, b.data(), ldb, c.data(), ldc, acc);
              REQUIRE(max_abs_diff(c, expect) < 1e-12);
            }
  }
}

TEST_CASE("gemm leaves padding columns of C untouched") {
  for (const KernelTable* kt : tables()) {
    std::vector<double> a{1, 2, 3, 4}, b{1, 0, 0, 1};
    std::vector<double> c(2 * 5, 42.0);
    kt->gemm(Transpose::no, 2, 2, 2, a.data(), 2, b.data(), 2, c.data(), 5, false);
    CHECK(c[0] == 1.0);
    CHECK(c[1] == 2.0);
    CHECK(c[5] == 3.0);
    CHECK(c[6] == 4.0);
    for (std::size_t j : {2, 3, 4, 7, 8, 9}) CHECK(c[j] == 42.0);
  }
}

TEST_CASE("vector kernels agree with the scalar reference") {
  const KernelTable* fast = avx2_kernels();
  if (!fast) return;
  const KernelTable& ref = scalar_kernels();
  std::mt19937_64 rng(11);
  for (std::size_t n : {0, 1, 3, 4, 5, 8, 15, 16, 17, 100, 1001}) {
    CAPTURE(n);
    const auto x = random_vector(n, rng, -20.0, 20.0);
    const auto y = random_vector(n, rng);
    double d_ref = ref.dot(n, x.data(), y.data());
    double d_fast = fast->dot(n, x.data(), y.data());
    CHECK(std::abs(d_ref - d_fast) <= 1e-12 * (1.0 + std::abs(d_ref)));

    auto y1 = y, y2 = y;
    ref.axpy(n, 0.7, x.data(), y1.data());
    fast->axpy(n, 0.7, x.data(), y2.data());
    CHECK(max_abs_diff(y1, y2) < 1e-13);

    std::vector<double> e1(n), e2(n);
    ref.elu(n, x.data(), e1.data());
    fast->elu(n, x.data(), e2.data());
    CHECK(max_abs_diff(e1, e2) < 1e-14);

    std::vector<double> g1(n), g2(n);
    ref.elu_backward(n, x.data(), e1.data(), y.data(), g1.data());
    fast->elu_backward(n, x.data(), e1.data(), y.data(), g2.data());
    CHECK(max_abs_diff(g1, g2) < 1e-14);

    std::vector<double> x1(n), x2(n);
    ref.exp(n, x.data(), x1.data());
    fast->exp(n, x.data(), x2.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(x1[i] - x2[i]) <= 1e-15 * x1[i]);
  }
}

TEST_CASE("exp kernels handle the extremes") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> x{-1000.0, -708.5, 0.0, 700.0, nan, -0.0, 1e-300};
  for (const KernelTable* kt : tables()) {
    CAPTURE(kt->name);
    std::vector<double> out(x.size());
    kt->exp(x.size(), x.data(), out.data());
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 1.0);
    CHECK(out[3] == doctest::Approx(std::exp(700.0)).epsilon(1e-14));
    CHECK(std::isnan(out[4]));
    CHECK(out[5] == 1.0);
    CHECK(out[6] == 1.0);
  }
}

TEST_CASE("elu is exact on the identity branch and smooth across zero") {
  std::vector<double> z{-1e-12, 0.0, 1e-12, 2.5, -30.0};
  for (const KernelTable* kt : tables()) {
    std::vector<double> out(z.size());
    kt->elu(z.size(), z.data(), out.data());
    CHECK(out[0] == doctest::Approx(-1e-12).epsilon(1e-6));
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 1e-12);
    CHECK(out[3] == 2.5);
    CHECK(out[4] == doctest::Approx(std::expm1(-30.0)).epsilon(1e-15));
  }
}

TEST_CASE("backend can be forced and restored") {
  const Backend initial = active_backend();
  set_backend(Backend::scalar);
  CHECK(active_backend() == Backend::scalar);
  CHECK(&kernels() == &scalar_kernels());
  if (avx2_kernels()) {
    set_backend(Backend::avx2);
    CHECK(&kernels() == avx2_kernels());
  } else {
    CHECK_THROWS_AS(set_backend(Backend::avx2), umc::ConfigError);
  }
  set_backend(initial);
}
