#pragma once

// Per-backend kernel entry points. Only dispatch.cpp and the equivalence tests
// should reach for these directly.

#include <cstddef>

namespace trs::simd::scalar {
void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a,
             const double* b, double* c, bool accumulate);
void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* a,
             const double* bt, double* c, bool accumulate);
void tanh(std::size_t n, const double* x, double* y);
void tanh_backward(std::size_t n, const double* y, const double* g,
                   double* out);
void axpy(std::size_t n, double alpha, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
}  // namespace trs::simd::scalar

#if defined(TRS_HAVE_AVX2)
namespace trs::simd::avx2 {
void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a,
             const double* b, double* c, bool accumulate);
void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* a,
             const double* bt, double* c, bool accumulate);
void tanh(std::size_t n, const double* x, double* y);
void tanh_backward(std::size_t n, const double* y, const double* g,
                   double* out);
void axpy(std::size_t n, double alpha, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
}  // namespace trs::simd::avx2
#endif
