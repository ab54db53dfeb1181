// Built with -mavx2 -mfma. Nothing in this file may run before dispatch.cpp
// has confirmed CPU support.

#include <immintrin.h>

#include <cmath>

#include "kernels_impl.hpp"

namespace trs::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// 4 rows x 8 columns of C held in registers across the whole k loop.
inline void block_4x8(std::size_t k, std::size_t m, const double* a,
                      std::size_t lda, const double* b, double* c,
                      bool accumulate) {
  __m256d c00, c01, c10, c11, c20, c21, c30, c31;
  if (accumulate) {
    c00 = _mm256_loadu_pd(c);
    c01 = _mm256_loadu_pd(c + 4);
    c10 = _mm256_loadu_pd(c + m);
    c11 = _mm256_loadu_pd(c + m + 4);
    c20 = _mm256_loadu_pd(c + 2 * m);
    c21 = _mm256_loadu_pd(c + 2 * m + 4);
    c30 = _mm256_loadu_pd(c + 3 * m);
    c31 = _mm256_loadu_pd(c + 3 * m + 4);
  } else {
    c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_pd();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * m);
    const __m256d b1 = _mm256_loadu_pd(b + p * m + 4);
    __m256d ar = _mm256_broadcast_sd(a + p);
    c00 = _mm256_fmadd_pd(ar, b0, c00);
    c01 = _mm256_fmadd_pd(ar, b1, c01);
    ar = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_fmadd_pd(ar, b0, c10);
    c11 = _mm256_fmadd_pd(ar, b1, c11);
    ar = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(ar, b0, c20);
    c21 = _mm256_fmadd_pd(ar, b1, c21);
    ar = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(ar, b0, c30);
    c31 = _mm256_fmadd_pd(ar, b1, c31);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + m, c10);
  _mm256_storeu_pd(c + m + 4, c11);
  _mm256_storeu_pd(c + 2 * m, c20);
  _mm256_storeu_pd(c + 2 * m + 4, c21);
  _mm256_storeu_pd(c + 3 * m, c30);
  _mm256_storeu_pd(c + 3 * m + 4, c31);
}

// One row of C, columns [j0, m).
inline void row_tail(std::size_t k, std::size_t m, std::size_t j0,
                     const double* arow, const double* b, double* crow,
                     bool accumulate) {
  std::size_t j = j0;
  for (; j + 4 <= m; j += 4) {
    __m256d acc = accumulate ? _mm256_loadu_pd(crow + j) : _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      acc = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + p),
                            _mm256_loadu_pd(b + p * m + j), acc);
    }
    _mm256_storeu_pd(crow + j, acc);
  }
  for (; j < m; ++j) {
    double s = accumulate ? crow[j] : 0.0;
    for (std::size_t p = 0; p < k; ++p) s = std::fma(arow[p], b[p * m + j], s);
    crow[j] = s;
  }
}

constexpr double kLn2 = 0.6931471805599453;
constexpr double kLn2Lo = 2.3190468138462996e-17;
constexpr double kLog2e = 1.4426950408889634;

// 2^n * (e^r - 1) + (2^n - 1) with |r| <= ln2/2; relative error near 1 ulp.
inline __m256d expm1_nonneg(__m256d u) {
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(u, _mm256_set1_pd(kLog2e)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2), u);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Lo), r);

  // Taylor coefficients 1/13! .. 1/2!
  __m256d q = _mm256_set1_pd(1.6059043836821613e-10);
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(2.08767569878681e-09));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(2.505210838544172e-08));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(2.755731922398589e-07));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(2.7557319223985893e-06));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(2.48015873015873e-05));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.984126984126984e-04));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.388888888888889e-03));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(8.333333333333333e-03));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(4.1666666666666664e-02));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.6666666666666666e-01));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(0.5));
  const __m256d em1r = _mm256_fmadd_pd(_mm256_mul_pd(r, r), q, r);

  const __m128i n32 = _mm256_cvtpd_epi32(n);
  const __m256i bits = _mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(n32), _mm256_set1_epi64x(1023)),
      52);
  const __m256d two_n = _mm256_castsi256_pd(bits);
  return _mm256_fmadd_pd(two_n, em1r,
                         _mm256_sub_pd(two_n, _mm256_set1_pd(1.0)));
}

inline __m256d tanh4(__m256d x) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d sign = _mm256_and_pd(x, sign_mask);
  const __m256d ax = _mm256_andnot_pd(sign_mask, x);
  // tanh(20) rounds to 1; NaN passes through min_pd's second operand rule.
  const __m256d u =
      _mm256_min_pd(_mm256_set1_pd(40.0), _mm256_add_pd(ax, ax));
  const __m256d e = expm1_nonneg(u);
  const __m256d t = _mm256_div_pd(e, _mm256_add_pd(e, _mm256_set1_pd(2.0)));
  return _mm256_or_pd(t, sign);
}

}  // namespace

void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a,
             const double* b, double* c, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    std::size_t j = 0;
    for (; j + 8 <= m; j += 8) {
      block_4x8(k, m, a + i * k, k, b + j, c + i * m + j, accumulate);
    }
    for (std::size_t r = 0; r < 4; ++r) {
      row_tail(k, m, j, a + (i + r) * k, b, c + (i + r) * m, accumulate);
    }
  }
  for (; i < n; ++i) row_tail(k, m, 0, a + i * k, b, c + i * m, accumulate);
}

void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* a,
             const double* bt, double* c, bool accumulate) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * m;
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) {
      const double* b0 = bt + j * k;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d av = _mm256_loadu_pd(arow + p);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
      }
      double d0 = hsum(s0), d1 = hsum(s1), d2 = hsum(s2), d3 = hsum(s3);
      for (; p < k; ++p) {
        d0 = std::fma(arow[p], b0[p], d0);
        d1 = std::fma(arow[p], b1[p], d1);
        d2 = std::fma(arow[p], b2[p], d2);
        d3 = std::fma(arow[p], b3[p], d3);
      }
      if (accumulate) {
        crow[j] += d0;
        crow[j + 1] += d1;
        crow[j + 2] += d2;
        crow[j + 3] += d3;
      } else {
        crow[j] = d0;
        crow[j + 1] = d1;
        crow[j + 2] = d2;
        crow[j + 3] = d3;
      }
    }
    for (; j < m; ++j) {
      const double d = dot(k, arow, bt + j * k);
      crow[j] = accumulate ? crow[j] + d : d;
    }
  }
}

void tanh(std::size_t n, const double* x, double* y) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, tanh4(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t r = 0; i + r < n; ++r) buf[r] = x[i + r];
    _mm256_store_pd(buf, tanh4(_mm256_load_pd(buf)));
    for (std::size_t r = 0; i + r < n; ++r) y[i + r] = buf[r];
  }
}

void tanh_backward(std::size_t n, const double* y, const double* g,
                   double* out) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d d = _mm256_fnmadd_pd(yv, yv, one);
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(_mm256_loadu_pd(g + i), d,
                                              _mm256_loadu_pd(out + i)));
  }
  for (; i < n; ++i) out[i] = std::fma(g[i], std::fma(-y[i], y[i], 1.0), out[i]);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

double dot(std::size_t n, const double* x, const double* y) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4),
                         s1);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

}  // namespace trs::simd::avx2
