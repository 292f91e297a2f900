#include "nrl/kernels.hpp"

#include <cmath>
#include <stdexcept>

#if defined(__x86_64__) || defined(_M_X64)
#define NRL_X86 1
#include <immintrin.h>
#else
#define NRL_X86 0
#endif

namespace nrl::kernels {

#if NRL_X86

namespace {

// 4x8 register-blocked microkernel; k innermost so each output element
// accumulates in the same order as the scalar reference.
inline void gemm_block_4x8(std::size_t n, std::size_t k, const double* a,
                           std::size_t lda, const double* b, double* c,
                           bool accumulate) {
  __m256d acc00, acc01, acc10, acc11, acc20, acc21, acc30, acc31;
  if (accumulate) {
    acc00 = _mm256_loadu_pd(c + 0 * n);
    acc01 = _mm256_loadu_pd(c + 0 * n + 4);
    acc10 = _mm256_loadu_pd(c + 1 * n);
    acc11 = _mm256_loadu_pd(c + 1 * n + 4);
    acc20 = _mm256_loadu_pd(c + 2 * n);
    acc21 = _mm256_loadu_pd(c + 2 * n + 4);
    acc30 = _mm256_loadu_pd(c + 3 * n);
    acc31 = _mm256_loadu_pd(c + 3 * n + 4);
  } else {
    acc00 = acc01 = acc10 = acc11 = acc20 = acc21 = acc30 = acc31 =
        _mm256_setzero_pd();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n);
    const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
    const __m256d a0 = _mm256_set1_pd(a[0 * lda + p]);
    acc00 = _mm256_fmadd_pd(a0, b0, acc00);
    acc01 = _mm256_fmadd_pd(a0, b1, acc01);
    const __m256d a1 = _mm256_set1_pd(a[1 * lda + p]);
    acc10 = _mm256_fmadd_pd(a1, b0, acc10);
    acc11 = _mm256_fmadd_pd(a1, b1, acc11);
    const __m256d a2 = _mm256_set1_pd(a[2 * lda + p]);
    acc20 = _mm256_fmadd_pd(a2, b0, acc20);
    acc21 = _mm256_fmadd_pd(a2, b1, acc21);
    const __m256d a3 = _mm256_set1_pd(a[3 * lda + p]);
    acc30 = _mm256_fmadd_pd(a3, b0, acc30);
    acc31 = _mm256_fmadd_pd(a3, b1, acc31);
  }
  _mm256_storeu_pd(c + 0 * n, acc00);
  _mm256_storeu_pd(c + 0 * n + 4, acc01);
  _mm256_storeu_pd(c + 1 * n, acc10);
  _mm256_storeu_pd(c + 1 * n + 4, acc11);
  _mm256_storeu_pd(c + 2 * n, acc20);
  _mm256_storeu_pd(c + 2 * n + 4, acc21);
  _mm256_storeu_pd(c + 3 * n, acc30);
  _mm256_storeu_pd(c + 3 * n + 4, acc31);
}

inline void gemm_edge(std::size_t rows, std::size_t cols, std::size_t n,
                      std::size_t k, const double* a, std::size_t lda,
                      const double* b, double* c, bool accumulate) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = accumulate ? c[r * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc = std::fma(a[r * lda + p], b[p * n + j], acc);
      }
      c[r * n + j] = acc;
    }
  }
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c, bool accumulate) {
  const std::size_t m4 = m / 4 * 4;
  const std::size_t n8 = n / 8 * 8;
  for (std::size_t i = 0; i < m4; i += 4) {
    for (std::size_t j = 0; j < n8; j += 8) {
      gemm_block_4x8(n, k, a + i * k, k, b + j, c + i * n + j, accumulate);
    }
    if (n8 < n) {
      gemm_edge(4, n - n8, n, k, a + i * k, k, b + n8, c + i * n + n8,
                accumulate);
    }
  }
  if (m4 < m) {
    gemm_edge(m - m4, n, n, k, a + m4 * k, k, b, c + m4 * n, accumulate);
  }
}

void add_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void relu_avx2(const double* a, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
  }
  for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_backward_avx2(const double* x, const double* dy, double* dx,
                        std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d g = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), g));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void scale_avx2(const double* x, double alpha, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * alpha;
}

}  // namespace

bool avx2_available() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const Kernels& avx2_kernels() {
  static const Kernels k = {
      "avx2",     gemm_avx2, add_avx2,  mul_avx2,
      relu_avx2,  relu_backward_avx2,   axpy_avx2,
      scale_avx2,
  };
  return k;
}

#else

bool avx2_available() { return false; }

const Kernels& avx2_kernels() {
  throw std::runtime_error("avx2 kernels not built on this architecture");
}

#endif

}  // namespace nrl::kernels
