// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace psdebnn {

// Dense row-major real tensor, f64 throughout. Scalars have rank 0
// (empty shape, one element).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() : shape{0} {}
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> s);
  static Tensor full(std::vector<std::size_t> s, double v);
  static Tensor vec(std::vector<double> d);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> d);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return shape.empty(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data[r * shape[1] + c];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace psdebnn
