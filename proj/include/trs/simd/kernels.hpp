#pragma once

// Dense float64 kernels behind the tensor ops. Every kernel has a scalar
// reference version; vector variants are picked at runtime from what the CPU
// supports and must agree with the reference to rounding.

#include <cstddef>
#include <string_view>

namespace trs::simd {

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;
  std::string_view name;

  // C[n x m] (+)= A[n x k] * B[k x m]; all row-major and contiguous.
  void (*gemm_nn)(std::size_t n, std::size_t k, std::size_t m, const double* a,
                  const double* b, double* c, bool accumulate);
  // C[n x m] (+)= A[n x k] * Bt[m x k]^T; row-wise dot products.
  void (*gemm_nt)(std::size_t n, std::size_t k, std::size_t m, const double* a,
                  const double* bt, double* c, bool accumulate);
  void (*tanh)(std::size_t n, const double* x, double* y);
  // out += g * (1 - y^2), y being a tanh output.
  void (*tanh_backward)(std::size_t n, const double* y, const double* g,
                        double* out);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  double (*dot)(std::size_t n, const double* x, const double* y);
};

const KernelTable& scalar_kernels();

// nullptr when the binary was built without AVX2 support or the CPU lacks
// AVX2/FMA.
const KernelTable* avx2_kernels();

// Table used by the tensor ops. Defaults to the widest supported backend.
const KernelTable& active_kernels();

// Throws std::invalid_argument if the backend is unavailable on this host.
void set_backend(Backend backend);

// RAII switch used by tests and benchmarks.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend);
  ~ScopedBackend();
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

}  // namespace trs::simd
