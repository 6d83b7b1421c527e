// SPDX-License-Identifier: Apache-2.0
//
// Fixed-step integration of the joint hidden-state / weight system.
// Inside the stochastic window (t1,t2): Euler–Maruyama on the stochastic
// weight coordinates, the configured deterministic scheme on the
// deterministic block, forward Euler on the hidden state (which sees the
// left-endpoint weights). Outside the window the whole system advances
// jointly with the deterministic scheme. The squared drift-mismatch
// ||u_theta||^2 is accumulated on the tape as auxiliary state.
#pragma once

#include <functional>
#include <iosfwd>

#include "psdebnn/brownian.hpp"
#include "psdebnn/dynamics.hpp"
#include "psdebnn/schedule.hpp"
#include "psdebnn/tape.hpp"

namespace psdebnn {

// One Euler–Maruyama step: stochastic coordinates get drift*dt + sigma*dB,
// deterministic coordinates drift*dt only.
WeightState em_step(double t, const WeightState& w, double dt,
                    const Tensor& drift, double sigma, const Tensor& dB);

using TapeDriftFn = std::function<NodeId(Tape&, double, NodeId)>;

NodeId euler_step(Tape& tape, double t, NodeId y, double dt,
                  const TapeDriftFn& f);
NodeId midpoint_step(Tape& tape, double t, NodeId y, double dt,
                     const TapeDriftFn& f);
NodeId rk4_step(Tape& tape, double t, NodeId y, double dt,
                const TapeDriftFn& f);
NodeId det_step(Tape& tape, DetScheme scheme, double t, NodeId y, double dt,
                const TapeDriftFn& f);

struct PathRecord {
  std::vector<double> times;
  std::vector<Tensor> w;              // one entry per step boundary
  std::vector<Tensor> h;              // empty unless a single trajectory
  std::vector<double> kl_integrand;   // ||u||^2 at the step's left endpoint;
                                      // 0 outside the window and at the end
  // CSV with header t,w_1..w_dw[,h_1..h_dh],kl_integrand
  void write_csv(std::ostream& os) const;
};

struct JointSystem {
  const WeightDrift* fq = nullptr;   // required
  const HiddenDrift* fh = nullptr;   // optional: weights-only integration
  DiffusionSpec diffusion;
  double prior_lambda = 1.0;         // OU rate entering u_theta
  NodeId w_jump;                     // replacement for w at t2 (fixed or
                                     // learnable); required by those modes
};

struct IntegrateOptions {
  bool with_kl = true;
  bool record_path = false;
};

struct IntegrateResult {
  NodeId h1;        // invalid when the system has no hidden state
  NodeId kl;        // scalar tape node, ||u||^2 dt summed over the window
  PathRecord record;
};

IntegrateResult integrate_joint(Tape& tape, const JointSystem& system,
                                const RegimeSchedule& schedule,
                                const BrownianPath& noise, NodeId w0,
                                NodeId h0, const IntegrateOptions& opts = {});

}  // namespace psdebnn
