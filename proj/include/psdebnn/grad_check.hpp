// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "psdebnn/tape.hpp"

namespace psdebnn {

// Builds a scalar loss on the tape from a parameter leaf.
using ScalarTapeFn = std::function<NodeId(Tape&, NodeId params)>;

struct GradCheckReport {
  std::vector<double> analytic;   // tape gradient, one entry per coordinate
  std::vector<double> numeric;    // central finite differences
  std::vector<double> rel_err;
  double max_rel_err = 0.0;
  bool passed = false;
};

// Compares the tape gradient of f against central finite differences with
// the given step. Per-coordinate relative error uses a small denominator
// floor (1e-6) so that near-zero gradients are judged on absolute error at
// the same scale instead of blowing up on finite-difference roundoff.
GradCheckReport grad_check(const ScalarTapeFn& f, const Tensor& params,
                           double step, double rtol);

}  // namespace psdebnn
