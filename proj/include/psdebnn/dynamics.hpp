// SPDX-License-Identifier: Apache-2.0
//
// The coupled dynamics: drift networks for the weight process (a depth
// hypernetwork), the hidden-state network whose parameters are the current
// weight vector, the OU prior drift, and the block diffusion that realizes
// vertical/horizontal stochasticity.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "psdebnn/mlp.hpp"
#include "psdebnn/tape.hpp"

namespace psdebnn {

// Disjoint split of weight indices into stochastic (s) and deterministic (d)
// coordinates; together they cover 0..dw-1.
struct WeightPartition {
  std::vector<std::uint32_t> s;
  std::vector<std::uint32_t> d;

  static WeightPartition all_stochastic(std::size_t dw);
  // s = first m1 indices, d = the rest.
  static WeightPartition leading(std::size_t m1, std::size_t dw);

  void validate(std::size_t dw) const;  // ConfigError
  std::size_t dim() const { return s.size() + d.size(); }
};

struct WeightState {
  Tensor w;
  std::optional<WeightPartition> partition;
  double time = 0.0;
};

struct HiddenState {
  Tensor h;
  double time = 0.0;
};

// g_p(t,w) = sigma * I on stochastic coordinates for t in (t1,t2), zero
// elsewhere. sigma must be positive whenever the window is nonempty so that
// the diffusion is invertible on the stochastic block.
struct DiffusionSpec {
  double sigma = 0.0;
  double t1 = 0.0;
  double t2 = 0.0;

  bool window_nonempty() const { return t2 > t1; }
  bool active_at(double t) const { return t > t1 && t < t2; }
};

// h0 = x padded with `augment_dim` zeros.
HiddenState augment_input(const Tensor& x, std::size_t augment_dim);

// OU prior drift: -lambda * w on stochastic coordinates, 0 on deterministic.
Tensor f_p_eval(double t, const WeightState& w, double lambda);

// Drift of the weight process dw/dt. Implementations evaluate on the tape so
// gradients flow through every solver step.
class WeightDrift {
 public:
  virtual ~WeightDrift() = default;
  virtual NodeId eval(Tape& tape, double t, NodeId w) const = 0;

  // Split form (horizontal separation): the S and D blocks are functions of
  // their own coordinates only.
  virtual bool is_split() const { return false; }
  virtual NodeId eval_s(Tape& tape, double t, NodeId w_s) const;
  virtual NodeId eval_d(Tape& tape, double t, NodeId w_d) const;
};

// Drift of the hidden state dh/dt; `h` may be a {dh} vector or a {B,dh}
// batch, `w` supplies the network parameters.
class HiddenDrift {
 public:
  virtual ~HiddenDrift() = default;
  virtual NodeId eval(Tape& tape, double t, NodeId h, NodeId w) const = 0;
};

// Hypernetwork f_q: an MLP over (w, t). With prior_lambda > 0 the drift is
// parametrized as OU prior plus correction, -lambda*w + mlp(w,t), so a
// zero-initialized final layer starts exactly on the prior.
class MlpWeightDrift final : public WeightDrift {
 public:
  MlpWeightDrift(MlpSpec spec, NodeId theta, double prior_lambda);
  NodeId eval(Tape& tape, double t, NodeId w) const override;

 private:
  MlpSpec spec_;
  NodeId theta_;
  double prior_lambda_;
};

// Split hypernetwork: independent MLPs for the S and D blocks. The prior
// residual applies to the S block only (the prior is zero on D).
class SplitMlpWeightDrift final : public WeightDrift {
 public:
  SplitMlpWeightDrift(MlpSpec s_spec, NodeId theta_s, MlpSpec d_spec,
                      NodeId theta_d, WeightPartition partition,
                      double prior_lambda);
  bool is_split() const override { return true; }
  NodeId eval(Tape& tape, double t, NodeId w) const override;
  NodeId eval_s(Tape& tape, double t, NodeId w_s) const override;
  NodeId eval_d(Tape& tape, double t, NodeId w_d) const override;
  const WeightPartition& partition() const { return partition_; }

 private:
  MlpSpec s_spec_, d_spec_;
  NodeId theta_s_, theta_d_;
  WeightPartition partition_;
  double prior_lambda_;
};

// f_h whose parameters are the weight vector itself (unflattened in the
// canonical packing order).
class MlpHiddenDrift final : public HiddenDrift {
 public:
  explicit MlpHiddenDrift(MlpSpec spec) : spec_(std::move(spec)) {}
  NodeId eval(Tape& tape, double t, NodeId h, NodeId w) const override;
  const MlpSpec& spec() const { return spec_; }

 private:
  MlpSpec spec_;
};

// Toy drift: cos(freq*t) on every coordinate outside (t1,t2), zero inside.
class CosineBurstDrift final : public WeightDrift {
 public:
  CosineBurstDrift(std::size_t dim, double t1, double t2, double freq = 20.0)
      : dim_(dim), t1_(t1), t2_(t2), freq_(freq) {}
  NodeId eval(Tape& tape, double t, NodeId w) const override;

 private:
  std::size_t dim_;
  double t1_, t2_;
  double freq_;
};

// 2-d toy with split drift [-w_s, t + w_d]; S = {0}, D = {1}.
class ToySplitDrift final : public WeightDrift {
 public:
  bool is_split() const override { return true; }
  NodeId eval(Tape& tape, double t, NodeId w) const override;
  NodeId eval_s(Tape& tape, double t, NodeId w_s) const override;
  NodeId eval_d(Tape& tape, double t, NodeId w_d) const override;
};

// 2-d toy with coupled drift [-w_s, t + w_d + w_s]; the D block reads the
// stochastic coordinate, so it is not split.
class ToyCoupledDrift final : public WeightDrift {
 public:
  NodeId eval(Tape& tape, double t, NodeId w) const override;
};

}  // namespace psdebnn
