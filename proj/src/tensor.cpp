#include "trs/tensor.hpp"

#include <cmath>

#include "trs/simd/kernels.hpp"

namespace trs {

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::transposed() const {
  Tensor t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

namespace tensor_ops {
namespace {

// Below this output width the axpy-style gemm wastes most of each vector
// lane, so the product is computed as row dot products instead.
constexpr std::size_t kNarrowOutput = 4;

void check_inner(const Tensor& a, std::size_t a_inner, const Tensor& b,
                 std::size_t b_inner, const char* op) {
  if (a_inner != b_inner) {
    throw std::invalid_argument(std::string(op) + ": inner dimension mismatch " +
                                a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_inner(a, a.cols(), b, b.rows(), "matmul");
  const auto& k = simd::active_kernels();
  Tensor c(a.rows(), b.cols());
  if (b.cols() < kNarrowOutput && a.cols() >= kNarrowOutput) {
    const Tensor bt = b.transposed();
    k.gemm_nt(a.rows(), a.cols(), b.cols(), a.data(), bt.data(), c.data(), false);
  } else {
    k.gemm_nn(a.rows(), a.cols(), b.cols(), a.data(), b.data(), c.data(), false);
  }
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_inner(a, a.cols(), b, b.cols(), "matmul_nt");
  const auto& k = simd::active_kernels();
  Tensor c(a.rows(), b.rows());
  if (a.cols() < kNarrowOutput && b.rows() >= kNarrowOutput) {
    const Tensor bt = b.transposed();
    k.gemm_nn(a.rows(), a.cols(), b.rows(), a.data(), bt.data(), c.data(), false);
  } else {
    k.gemm_nt(a.rows(), a.cols(), b.rows(), a.data(), b.data(), c.data(), false);
  }
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  check_inner(a, a.rows(), b, b.rows(), "matmul_tn");
  const auto& k = simd::active_kernels();
  const Tensor at = a.transposed();
  Tensor c(a.cols(), b.cols());
  if (b.cols() < kNarrowOutput && a.rows() >= kNarrowOutput) {
    const Tensor bt = b.transposed();
    k.gemm_nt(at.rows(), at.cols(), b.cols(), at.data(), bt.data(), c.data(),
              false);
  } else {
    k.gemm_nn(at.rows(), at.cols(), b.cols(), at.data(), b.data(), c.data(),
              false);
  }
  return c;
}

void tanh_inplace(Tensor& x) {
  simd::active_kernels().tanh(x.size(), x.data(), x.data());
}

}  // namespace tensor_ops
}  // namespace trs
