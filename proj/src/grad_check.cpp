// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "psdebnn/errors.hpp"

namespace psdebnn {

GradCheckReport grad_check(const ScalarTapeFn& f, const Tensor& params,
                           double step, double rtol) {
  if (step <= 0.0) throw ContractError("grad_check: step must be positive");

  GradCheckReport rep;
  const std::size_t n = params.numel();

  {
    Tape tape;
    const NodeId p = tape.leaf(params);
    const NodeId loss = f(tape, p);
    const auto grads = tape.backward(loss);
    rep.analytic = grads[p.v].data;
  }

  auto eval = [&](const Tensor& x) {
    Tape tape;
    const NodeId p = tape.leaf(x);
    return tape.value(f(tape, p)).data[0];
  };

  rep.numeric.resize(n);
  Tensor x = params;
  for (std::size_t i = 0; i < n; ++i) {
    const double orig = x.data[i];
    x.data[i] = orig + step;
    const double fp = eval(x);
    x.data[i] = orig - step;
    const double fm = eval(x);
    x.data[i] = orig;
    rep.numeric[i] = (fp - fm) / (2.0 * step);
  }

  constexpr double kDenomFloor = 1e-6;
  rep.rel_err.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double denom = std::max(
        {std::fabs(rep.analytic[i]), std::fabs(rep.numeric[i]), kDenomFloor});
    rep.rel_err[i] = std::fabs(rep.analytic[i] - rep.numeric[i]) / denom;
    rep.max_rel_err = std::max(rep.max_rel_err, rep.rel_err[i]);
  }
  rep.passed = rep.max_rel_err < rtol;
  return rep;
}

}  // namespace psdebnn
