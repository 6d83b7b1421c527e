// SPDX-License-Identifier: Apache-2.0
//
// AVX2/FMA kernels. Built with per-function target attributes so this
// translation unit needs no special flags; the dispatcher only installs
// the table after a runtime CPU probe.

#include "psdebnn/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define PSDEBNN_HAVE_AVX2_BUILD 1
#include <immintrin.h>

#include <cstring>

#include "kernels_detail.hpp"
#endif

namespace psdebnn::kernels {

#if defined(PSDEBNN_HAVE_AVX2_BUILD)

#define PSDEBNN_AVX2 __attribute__((target("avx2,fma")))

namespace {

PSDEBNN_AVX2 void add_v(const double* a, const double* b, double* out,
                        std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

PSDEBNN_AVX2 void sub_v(const double* a, const double* b, double* out,
                        std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

PSDEBNN_AVX2 void mul_v(const double* a, const double* b, double* out,
                        std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

PSDEBNN_AVX2 void scale_v(const double* x, double c, double* out,
                          std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vc));
  }
  for (; i < n; ++i) out[i] = x[i] * c;
}

PSDEBNN_AVX2 void axpy_v(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d acc =
        _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

PSDEBNN_AVX2 void square_v(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(v, v));
  }
  for (; i < n; ++i) out[i] = x[i] * x[i];
}

PSDEBNN_AVX2 double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s2 = _mm_add_pd(lo, hi);
  const __m128d s1 = _mm_add_sd(s2, _mm_unpackhi_pd(s2, s2));
  return _mm_cvtsd_f64(s1);
}

PSDEBNN_AVX2 double dot_v(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

PSDEBNN_AVX2 double sum_v(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  }
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

PSDEBNN_AVX2 void matmul_v(const double* a, const double* b, double* out,
                           std::size_t m, std::size_t k, std::size_t n) {
  std::memset(out, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      const __m256d vav = _mm256_set1_pd(av);
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        const __m256d acc = _mm256_fmadd_pd(vav, _mm256_loadu_pd(brow + j),
                                            _mm256_loadu_pd(orow + j));
        _mm256_storeu_pd(orow + j, acc);
      }
      for (; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace

bool avx2_available() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const Ops& avx2_ops() {
  static const Ops ops = {
      "avx2",    add_v,    sub_v,
      mul_v,     scale_v,  axpy_v,
      square_v,  dot_v,    sum_v,
      matmul_v,  detail::softplus_s, detail::sigmoid_s,
      detail::tanh_s, detail::cos_s, detail::sin_s,
      detail::exp_s, detail::log_s,
  };
  return ops;
}

#else  // non-x86 build: no AVX2 backend

bool avx2_available() { return false; }

const Ops& avx2_ops() { return scalar_ops(); }

#endif

}  // namespace psdebnn::kernels
