// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "psdebnn/errors.hpp"

namespace psdebnn {

WeightPartition WeightPartition::all_stochastic(std::size_t dw) {
  WeightPartition p;
  p.s.resize(dw);
  for (std::size_t i = 0; i < dw; ++i) p.s[i] = static_cast<std::uint32_t>(i);
  return p;
}

WeightPartition WeightPartition::leading(std::size_t m1, std::size_t dw) {
  if (m1 > dw)
    throw ConfigError("partition: m1 = " + std::to_string(m1) +
                      " exceeds d_w = " + std::to_string(dw));
  WeightPartition p;
  p.s.resize(m1);
  p.d.resize(dw - m1);
  for (std::size_t i = 0; i < m1; ++i) p.s[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = m1; i < dw; ++i)
    p.d[i - m1] = static_cast<std::uint32_t>(i);
  return p;
}

void WeightPartition::validate(std::size_t dw) const {
  if (s.size() + d.size() != dw)
    throw ConfigError("partition: |S| + |D| != d_w");
  std::vector<char> seen(dw, 0);
  for (std::uint32_t i : s) {
    if (i >= dw || seen[i]) throw ConfigError("partition: bad S index set");
    seen[i] = 1;
  }
  for (std::uint32_t i : d) {
    if (i >= dw || seen[i]) throw ConfigError("partition: bad D index set");
    seen[i] = 1;
  }
}

HiddenState augment_input(const Tensor& x, std::size_t augment_dim) {
  if (x.rank() != 1 && x.numel() != 0)
    throw ShapeError("augment_input: rank-1 input required");
  HiddenState h;
  h.h = Tensor::zeros({x.numel() + augment_dim});
  std::memcpy(h.h.data.data(), x.data.data(), x.numel() * sizeof(double));
  h.time = 0.0;
  return h;
}

Tensor f_p_eval(double /*t*/, const WeightState& w, double lambda) {
  Tensor out = Tensor::zeros(w.w.shape);
  if (w.partition) {
    for (std::uint32_t i : w.partition->s) out.data[i] = -lambda * w.w.data[i];
  } else {
    for (std::size_t i = 0; i < w.w.numel(); ++i)
      out.data[i] = -lambda * w.w.data[i];
  }
  return out;
}

NodeId WeightDrift::eval_s(Tape&, double, NodeId) const {
  throw ContractError("drift is not split: no S block");
}

NodeId WeightDrift::eval_d(Tape&, double, NodeId) const {
  throw ContractError("drift is not split: no D block");
}

MlpWeightDrift::MlpWeightDrift(MlpSpec spec, NodeId theta, double prior_lambda)
    : spec_(std::move(spec)), theta_(theta), prior_lambda_(prior_lambda) {
  spec_.validate();
  if (spec_.in_dim() != spec_.out_dim())
    throw ConfigError("weight drift MLP must map d_w to d_w");
}

NodeId MlpWeightDrift::eval(Tape& tape, double t, NodeId w) const {
  NodeId out = mlp_apply(tape, spec_, theta_, w, t);
  if (prior_lambda_ != 0.0)
    out = tape.add(out, tape.scale(w, -prior_lambda_));
  return out;
}

SplitMlpWeightDrift::SplitMlpWeightDrift(MlpSpec s_spec, NodeId theta_s,
                                         MlpSpec d_spec, NodeId theta_d,
                                         WeightPartition partition,
                                         double prior_lambda)
    : s_spec_(std::move(s_spec)),
      d_spec_(std::move(d_spec)),
      theta_s_(theta_s),
      theta_d_(theta_d),
      partition_(std::move(partition)),
      prior_lambda_(prior_lambda) {
  s_spec_.validate();
  d_spec_.validate();
  partition_.validate(partition_.dim());
  if (s_spec_.in_dim() != partition_.s.size() ||
      s_spec_.out_dim() != partition_.s.size())
    throw ConfigError("S-block MLP width must equal |S|");
  if (d_spec_.in_dim() != partition_.d.size() ||
      d_spec_.out_dim() != partition_.d.size())
    throw ConfigError("D-block MLP width must equal |D|");
}

NodeId SplitMlpWeightDrift::eval_s(Tape& tape, double t, NodeId w_s) const {
  NodeId out = mlp_apply(tape, s_spec_, theta_s_, w_s, t);
  if (prior_lambda_ != 0.0)
    out = tape.add(out, tape.scale(w_s, -prior_lambda_));
  return out;
}

NodeId SplitMlpWeightDrift::eval_d(Tape& tape, double t, NodeId w_d) const {
  return mlp_apply(tape, d_spec_, theta_d_, w_d, t);
}

NodeId SplitMlpWeightDrift::eval(Tape& tape, double t, NodeId w) const {
  const std::size_t dw = partition_.dim();
  const NodeId w_s =
      tape.gather(w, partition_.s, {partition_.s.size()});
  const NodeId w_d =
      tape.gather(w, partition_.d, {partition_.d.size()});
  const NodeId cat = tape.concat(eval_s(tape, t, w_s), eval_d(tape, t, w_d));
  // undo the [S-block, D-block] ordering back to weight-index order
  std::vector<std::uint32_t> inv(dw);
  for (std::size_t i = 0; i < partition_.s.size(); ++i)
    inv[partition_.s[i]] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < partition_.d.size(); ++i)
    inv[partition_.d[i]] = static_cast<std::uint32_t>(partition_.s.size() + i);
  return tape.gather(cat, std::move(inv), {dw});
}

NodeId MlpHiddenDrift::eval(Tape& tape, double t, NodeId h, NodeId w) const {
  return mlp_apply(tape, spec_, w, h, t);
}

NodeId CosineBurstDrift::eval(Tape& tape, double t, NodeId /*w*/) const {
  // window test matches the solver's step classification: a step starting
  // at t in [t1, t2) lies inside the stochastic window
  const double v = (t >= t1_ && t < t2_) ? 0.0 : std::cos(freq_ * t);
  return tape.constant(Tensor::full({dim_}, v));
}

NodeId ToySplitDrift::eval_s(Tape& tape, double /*t*/, NodeId w_s) const {
  return tape.scale(w_s, -1.0);
}

NodeId ToySplitDrift::eval_d(Tape& tape, double t, NodeId w_d) const {
  return tape.add(w_d, tape.constant(Tensor::full({1}, t)));
}

NodeId ToySplitDrift::eval(Tape& tape, double t, NodeId w) const {
  const NodeId w_s = tape.slice(w, 0, {1});
  const NodeId w_d = tape.slice(w, 1, {1});
  return tape.concat(eval_s(tape, t, w_s), eval_d(tape, t, w_d));
}

NodeId ToyCoupledDrift::eval(Tape& tape, double t, NodeId w) const {
  const NodeId w_s = tape.slice(w, 0, {1});
  const NodeId w_d = tape.slice(w, 1, {1});
  const NodeId ds = tape.scale(w_s, -1.0);
  const NodeId dd =
      tape.add(tape.add(w_d, w_s), tape.constant(Tensor::full({1}, t)));
  return tape.concat(ds, dd);
}

}  // namespace psdebnn
