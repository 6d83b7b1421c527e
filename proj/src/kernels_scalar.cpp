// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. Plain loops, sequential left-to-right reductions;
// the AVX2 backend is equivalence-tested against these.

#include <cmath>
#include <cstring>

#include "kernels_detail.hpp"
#include "psdebnn/kernels.hpp"

namespace psdebnn::kernels {

namespace {

void add_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_s(const double* x, double c, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * c;
}

void axpy_s(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void square_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * x[i];
}

double dot_s(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_s(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void matmul_s(const double* a, const double* b, double* out, std::size_t m,
              std::size_t k, std::size_t n) {
  std::memset(out, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace

namespace detail {

// Shared by both backends: activations stay scalar libm so the active
// backend never changes their bit patterns.
void softplus_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    out[i] = std::fmax(v, 0.0) + std::log1p(std::exp(-std::fabs(v)));
  }
}

void sigmoid_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
}

void tanh_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

void cos_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::cos(x[i]);
}

void sin_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(x[i]);
}

void exp_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void log_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(x[i]);
}

}  // namespace detail

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",  add_s,    sub_s,
      mul_s,     scale_s,  axpy_s,
      square_s,  dot_s,    sum_s,
      matmul_s,  detail::softplus_s, detail::sigmoid_s,
      detail::tanh_s, detail::cos_s, detail::sin_s,
      detail::exp_s, detail::log_s,
  };
  return ops;
}

}  // namespace psdebnn::kernels
