// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/tensor.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "psdebnn/errors.hpp"

namespace psdebnn {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != data.size())
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<std::size_t> s) {
  std::vector<double> d(shape_numel(s), 0.0);
  return Tensor(std::move(s), std::move(d));
}

Tensor Tensor::full(std::vector<std::size_t> s, double v) {
  std::vector<double> d(shape_numel(s), v);
  return Tensor(std::move(s), std::move(d));
}

Tensor Tensor::vec(std::vector<double> d) {
  std::vector<std::size_t> s{d.size()};
  return Tensor(std::move(s), std::move(d));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> d) {
  return Tensor({rows, cols}, std::move(d));
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace psdebnn
