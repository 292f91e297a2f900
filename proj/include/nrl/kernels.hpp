#pragma once

#include <cstddef>

// Inner-loop arithmetic kernels. Every entry point has a scalar reference
// implementation and, on x86-64, an AVX2 variant selected at runtime.
//
// All variants are bitwise-equivalent by contract: accumulations use fused
// multiply-add in a fixed order (sequential over k for gemm, sequential over
// the flat index elsewhere), so the dispatch choice never changes results.
namespace nrl::kernels {

struct Kernels {
  const char* name;

  // C[M x N] = A[M x K] * B[K x N], row-major packed.
  // When accumulate is set, adds into C instead of overwriting.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c, bool accumulate);

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*relu)(const double* a, double* out, std::size_t n);
  // dx[i] += dy[i] where x[i] > 0
  void (*relu_backward)(const double* x, const double* dy, double* dx,
                        std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*scale)(const double* x, double alpha, double* out, std::size_t n);
};

const Kernels& scalar_kernels();
const Kernels& avx2_kernels();  // valid only if avx2_available()
bool avx2_available();

// Runtime-selected table. Defaults to the best supported variant; the
// NRL_KERNELS environment variable ("scalar" or "avx2") overrides.
const Kernels& active();
void set_active(const char* name);  // "scalar", "avx2" or "auto"

}  // namespace nrl::kernels
