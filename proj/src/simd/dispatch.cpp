#include <atomic>
#include <stdexcept>

#include "kernels_impl.hpp"
#include "trs/simd/kernels.hpp"

namespace trs::simd {
namespace {

const KernelTable kScalar{
    Backend::scalar,      "scalar",          scalar::gemm_nn, scalar::gemm_nt,
    scalar::tanh,         scalar::tanh_backward, scalar::axpy, scalar::dot,
};

#if defined(TRS_HAVE_AVX2)
const KernelTable kAvx2{
    Backend::avx2,      "avx2",          avx2::gemm_nn, avx2::gemm_nt,
    avx2::tanh,         avx2::tanh_backward, avx2::axpy, avx2::dot,
};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable* best_available() {
  if (const KernelTable* t = avx2_kernels()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{best_available()};
  return slot;
}

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
#if defined(TRS_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() { return *active_slot().load(); }

void set_backend(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      active_slot().store(&kScalar);
      return;
    case Backend::avx2:
      if (const KernelTable* t = avx2_kernels()) {
        active_slot().store(t);
        return;
      }
      throw std::invalid_argument("AVX2 kernels are not available on this host");
  }
}

ScopedBackend::ScopedBackend(Backend backend)
    : previous_(active_kernels().backend) {
  set_backend(backend);
}

ScopedBackend::~ScopedBackend() { set_backend(previous_); }

}  // namespace trs::simd
