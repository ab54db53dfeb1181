#include "kernels_impl.hpp"

#include <cmath>

namespace trs::simd::scalar {

void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a,
             const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    if (!accumulate) {
      for (std::size_t j = 0; j < m; ++j) crow[j] = 0.0;
    }
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
}

void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* a,
             const double* bt, double* c, bool accumulate) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = bt + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * m + j] = accumulate ? c[i * m + j] + s : s;
    }
  }
}

void tanh(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward(std::size_t n, const double* y, const double* g,
                   double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] += g[i] * (1.0 - y[i] * y[i]);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace trs::simd::scalar
