// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "psdebnn/tape.hpp"

namespace psdebnn {

// Version tag of the canonical parameter packing below. Stored in
// checkpoints; bump it if the layout ever changes.
inline constexpr std::uint32_t kFlattenOrderVersion = 1;

// Softplus MLP. `widths` lists layer sizes input..output; when `time_input`
// is set the network receives the integration time t as one extra input
// coordinate appended after the state.
struct MlpSpec {
  std::vector<std::size_t> widths;
  bool time_input = true;

  // Throws ConfigError unless there is at least one hidden layer and every
  // width is positive.
  void validate() const;

  std::size_t in_dim() const { return widths.front(); }
  std::size_t out_dim() const { return widths.back(); }
  std::size_t effective_in() const {
    return widths.front() + (time_input ? 1 : 0);
  }
  // Total parameter count under the canonical packing.
  std::size_t param_count() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// Structured view of the parameters: weights[l] is (out,in) row-major.
struct MlpParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

// Canonical packing: for each layer, weight matrix row-major, then bias.
Tensor mlp_flatten(const MlpSpec& spec, const MlpParams& p);
MlpParams mlp_unflatten(const MlpSpec& spec, const Tensor& flat);

// Forward pass with parameters taken from a flat tape vector. `input` is a
// {in} vector or a {B,in} batch matrix; `t` is consumed only when
// spec.time_input. Hidden layers use softplus, the output layer is linear.
NodeId mlp_apply(Tape& tape, const MlpSpec& spec, NodeId flat_params,
                 NodeId input, double t = 0.0);

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases; the final
// layer is zeroed when `zero_final` so the net starts as the zero map.
Tensor mlp_init(const MlpSpec& spec, std::mt19937_64& rng, bool zero_final);

}  // namespace psdebnn
