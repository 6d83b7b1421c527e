// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace psdebnn::kernels::detail {

void softplus_s(const double* x, double* out, std::size_t n);
void sigmoid_s(const double* x, double* out, std::size_t n);
void tanh_s(const double* x, double* out, std::size_t n);
void cos_s(const double* x, double* out, std::size_t n);
void sin_s(const double* x, double* out, std::size_t n);
void exp_s(const double* x, double* out, std::size_t n);
void log_s(const double* x, double* out, std::size_t n);

}  // namespace psdebnn::kernels::detail
