// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/mlp.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "psdebnn/errors.hpp"

namespace psdebnn {

void MlpSpec::validate() const {
  if (widths.size() < 3)
    throw ConfigError("MlpSpec: at least one hidden layer required (got " +
                      std::to_string(widths.size()) + " widths)");
  for (std::size_t w : widths)
    if (w == 0) throw ConfigError("MlpSpec: widths must be positive");
}

std::size_t MlpSpec::param_count() const {
  std::size_t count = 0;
  std::size_t in = effective_in();
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const std::size_t out = widths[l];
    count += out * in + out;
    in = out;
  }
  return count;
}

Tensor mlp_flatten(const MlpSpec& spec, const MlpParams& p) {
  Tensor flat = Tensor::zeros({spec.param_count()});
  std::size_t off = 0;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const Tensor& w = p.weights[l];
    const Tensor& b = p.biases[l];
    std::memcpy(flat.data.data() + off, w.data.data(),
                w.numel() * sizeof(double));
    off += w.numel();
    std::memcpy(flat.data.data() + off, b.data.data(),
                b.numel() * sizeof(double));
    off += b.numel();
  }
  if (off != flat.numel())
    throw ConfigError("mlp_flatten: parameter count mismatch");
  return flat;
}

MlpParams mlp_unflatten(const MlpSpec& spec, const Tensor& flat) {
  if (flat.numel() != spec.param_count())
    throw ConfigError("mlp_unflatten: expected " +
                      std::to_string(spec.param_count()) + " parameters, got " +
                      std::to_string(flat.numel()));
  MlpParams p;
  std::size_t off = 0;
  std::size_t in = spec.effective_in();
  for (std::size_t l = 1; l < spec.widths.size(); ++l) {
    const std::size_t out = spec.widths[l];
    Tensor w = Tensor::zeros({out, in});
    std::memcpy(w.data.data(), flat.data.data() + off,
                out * in * sizeof(double));
    off += out * in;
    Tensor b = Tensor::zeros({out});
    std::memcpy(b.data.data(), flat.data.data() + off, out * sizeof(double));
    off += out;
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
    in = out;
  }
  return p;
}

namespace {

// Batch first layer without concatenating a time column: the time input
// contributes t * (time column of W1), folded into an effective bias.
NodeId first_layer_batch(Tape& tape, const MlpSpec& spec, NodeId flat,
                         NodeId x, double t) {
  const std::size_t in = spec.in_dim();
  const std::size_t in_eff = spec.effective_in();
  const std::size_t out = spec.widths[1];

  std::vector<std::uint32_t> widx;
  widx.reserve(out * in);
  for (std::size_t r = 0; r < out; ++r)
    for (std::size_t c = 0; c < in; ++c)
      widx.push_back(static_cast<std::uint32_t>(r * in_eff + c));
  const NodeId w_x = tape.gather(flat, std::move(widx), {out, in});
  NodeId bias = tape.slice(flat, out * in_eff, {out});

  if (spec.time_input) {
    std::vector<std::uint32_t> tidx;
    tidx.reserve(out);
    for (std::size_t r = 0; r < out; ++r)
      tidx.push_back(static_cast<std::uint32_t>(r * in_eff + in));
    const NodeId w_t = tape.gather(flat, std::move(tidx), {out});
    bias = tape.add(bias, tape.scale(w_t, t));
  }
  return tape.add_rowvec(tape.matmul(x, tape.transpose(w_x)), bias);
}

}  // namespace

NodeId mlp_apply(Tape& tape, const MlpSpec& spec, NodeId flat_params,
                 NodeId input, double t) {
  const Tensor& in_val = tape.value(input);
  const bool batch = in_val.rank() == 2;
  if (!batch && in_val.rank() != 1)
    throw ShapeError("mlp_apply: input must be rank 1 or 2");
  const std::size_t got = batch ? in_val.shape[1] : in_val.shape[0];
  if (got != spec.in_dim())
    throw ConfigError("mlp_apply: input width " + std::to_string(got) +
                      " does not match spec width " +
                      std::to_string(spec.in_dim()));
  if (tape.value(flat_params).numel() != spec.param_count())
    throw ConfigError("mlp_apply: flat parameter vector has " +
                      std::to_string(tape.value(flat_params).numel()) +
                      " entries, spec requires " +
                      std::to_string(spec.param_count()));

  const std::size_t layers = spec.widths.size() - 1;
  NodeId h = input;
  std::size_t off = 0;
  std::size_t in = spec.effective_in();

  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t out = spec.widths[l + 1];
    NodeId pre;
    if (l == 0 && batch) {
      pre = first_layer_batch(tape, spec, flat_params, h, t);
    } else {
      if (l == 0 && spec.time_input)
        h = tape.concat(h, tape.constant(Tensor::vec({t})));
      const NodeId w = tape.slice(flat_params, off, {out, in});
      const NodeId b = tape.slice(flat_params, off + out * in, {out});
      pre = batch ? tape.add_rowvec(tape.matmul(h, tape.transpose(w)), b)
                  : tape.add(tape.matmul(w, h), b);
    }
    off += out * in + out;
    h = (l + 1 < layers) ? tape.softplus(pre) : pre;
    in = out;
  }
  return h;
}

Tensor mlp_init(const MlpSpec& spec, std::mt19937_64& rng, bool zero_final) {
  MlpParams p;
  std::size_t in = spec.effective_in();
  const std::size_t layers = spec.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t out = spec.widths[l + 1];
    Tensor w = Tensor::zeros({out, in});
    Tensor b = Tensor::zeros({out});
    if (!(zero_final && l + 1 == layers)) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& x : w.data) x = dist(rng);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
    in = out;
  }
  return mlp_flatten(spec, p);
}

}  // namespace psdebnn
