// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "psdebnn/tensor.hpp"

namespace psdebnn {

// Pre-drawn Gaussian increments for one posterior sample. Regenerating from
// the same seed reproduces the increments bitwise, so a path can be shared
// between a forward pass and finite-difference probes of the same loss.
struct BrownianPath {
  std::uint64_t seed = 0;
  std::size_t num_steps = 0;
  std::size_t dim = 0;
  double dt = 0.0;
  Tensor increments;  // {num_steps, dim}, entries ~ N(0, dt)

  const double* step(std::size_t k) const {
    return increments.data.data() + k * dim;
  }
};

BrownianPath sample_brownian(std::uint64_t seed, std::size_t num_steps,
                             std::size_t dim, double dt);

// Process-wide instrumentation: total Gaussian scalars drawn and total
// u_theta evaluations. Backs the efficiency accounting of the eval report.
std::uint64_t brownian_scalar_draws();
std::uint64_t u_theta_eval_count();
void add_u_theta_evals(std::uint64_t n);
void reset_solver_counters();

}  // namespace psdebnn
