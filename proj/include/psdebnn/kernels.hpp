// SPDX-License-Identifier: Apache-2.0
//
// Dense f64 kernels behind the tensor layer. Two backends: a scalar
// reference implementation and an AVX2/FMA variant selected at runtime
// (CPU probe, overridable through PSDEBNN_KERNELS=scalar|avx2).
//
// Pure elementwise kernels (add/sub/mul/scale/square) produce bitwise
// identical results on every backend. Reductions and matmul may differ
// from the reference in the last ulps because the AVX2 path reassociates
// partial sums and contracts multiply-add into FMA; the backend is fixed
// per process, so results stay reproducible run to run.
#pragma once

#include <cstddef>
#include <string_view>

namespace psdebnn::kernels {

struct Ops {
  const char* name;

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* x, double c, double* out, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*square)(const double* x, double* out, std::size_t n);

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);

  // out(m,n) = a(m,k) * b(k,n), row-major, out overwritten.
  void (*matmul)(const double* a, const double* b, double* out, std::size_t m,
                 std::size_t k, std::size_t n);

  // Transcendentals are shared scalar-libm loops on every backend so that
  // activations are bit-identical regardless of dispatch.
  void (*softplus)(const double* x, double* out, std::size_t n);
  void (*sigmoid)(const double* x, double* out, std::size_t n);
  void (*tanh)(const double* x, double* out, std::size_t n);
  void (*cos)(const double* x, double* out, std::size_t n);
  void (*sin)(const double* x, double* out, std::size_t n);
  void (*exp)(const double* x, double* out, std::size_t n);
  void (*log)(const double* x, double* out, std::size_t n);
};

const Ops& scalar_ops();

bool avx2_available();
// Valid only when avx2_available(); the table's SIMD entries require AVX2+FMA.
const Ops& avx2_ops();

// Active backend. Resolved once on first use: PSDEBNN_KERNELS env var if set,
// otherwise AVX2 when the CPU supports it, otherwise scalar.
const Ops& active();

// Force a backend ("scalar", "avx2", "auto"). Test hook; throws ConfigError
// for an unknown or unsupported name.
void select(std::string_view name);

}  // namespace psdebnn::kernels
