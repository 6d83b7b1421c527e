// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/brownian.hpp"

#include <atomic>
#include <cmath>
#include <random>

#include "psdebnn/errors.hpp"

namespace psdebnn {

namespace {
std::atomic<std::uint64_t> g_brownian_draws{0};
std::atomic<std::uint64_t> g_u_theta_evals{0};
}  // namespace

BrownianPath sample_brownian(std::uint64_t seed, std::size_t num_steps,
                             std::size_t dim, double dt) {
  if (num_steps > 0 && dt <= 0.0)
    throw ContractError("sample_brownian: dt must be positive");
  BrownianPath path;
  path.seed = seed;
  path.num_steps = num_steps;
  path.dim = dim;
  path.dt = dt;
  path.increments = Tensor::zeros({num_steps, dim});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(dt));
  for (double& v : path.increments.data) v = gauss(rng);
  g_brownian_draws.fetch_add(num_steps * dim, std::memory_order_relaxed);
  return path;
}

std::uint64_t brownian_scalar_draws() {
  return g_brownian_draws.load(std::memory_order_relaxed);
}

std::uint64_t u_theta_eval_count() {
  return g_u_theta_evals.load(std::memory_order_relaxed);
}

void add_u_theta_evals(std::uint64_t n) {
  g_u_theta_evals.fetch_add(n, std::memory_order_relaxed);
}

void reset_solver_counters() {
  g_brownian_draws.store(0, std::memory_order_relaxed);
  g_u_theta_evals.store(0, std::memory_order_relaxed);
}

}  // namespace psdebnn
