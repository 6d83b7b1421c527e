// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/solvers.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "psdebnn/errors.hpp"

namespace psdebnn {

WeightState em_step(double t, const WeightState& w, double dt,
                    const Tensor& drift, double sigma, const Tensor& dB) {
  if (dt <= 0.0) throw ContractError("em_step: dt must be positive");
  if (!drift.same_shape(w.w))
    throw ShapeError("em_step: drift shape does not match state");
  WeightState out = w;
  out.time = t + dt;
  for (std::size_t i = 0; i < w.w.numel(); ++i)
    out.w.data[i] = w.w.data[i] + drift.data[i] * dt;
  const auto& s_idx = w.partition
                          ? w.partition->s
                          : WeightPartition::all_stochastic(w.w.numel()).s;
  if (dB.numel() != s_idx.size())
    throw ContractError("em_step: noise length " + std::to_string(dB.numel()) +
                        " != |S| = " + std::to_string(s_idx.size()));
  for (std::size_t i = 0; i < s_idx.size(); ++i)
    out.w.data[s_idx[i]] += sigma * dB.data[i];
  return out;
}

NodeId euler_step(Tape& tape, double t, NodeId y, double dt,
                  const TapeDriftFn& f) {
  return tape.add(y, tape.scale(f(tape, t, y), dt));
}

NodeId midpoint_step(Tape& tape, double t, NodeId y, double dt,
                     const TapeDriftFn& f) {
  const NodeId k1 = f(tape, t, y);
  const NodeId mid = tape.add(y, tape.scale(k1, dt * 0.5));
  const NodeId k2 = f(tape, t + dt * 0.5, mid);
  return tape.add(y, tape.scale(k2, dt));
}

NodeId rk4_step(Tape& tape, double t, NodeId y, double dt,
                const TapeDriftFn& f) {
  const NodeId k1 = f(tape, t, y);
  const NodeId k2 =
      f(tape, t + dt * 0.5, tape.add(y, tape.scale(k1, dt * 0.5)));
  const NodeId k3 =
      f(tape, t + dt * 0.5, tape.add(y, tape.scale(k2, dt * 0.5)));
  const NodeId k4 = f(tape, t + dt, tape.add(y, tape.scale(k3, dt)));
  NodeId acc = tape.add(y, tape.scale(k1, dt / 6.0));
  acc = tape.add(acc, tape.scale(k2, dt / 3.0));
  acc = tape.add(acc, tape.scale(k3, dt / 3.0));
  return tape.add(acc, tape.scale(k4, dt / 6.0));
}

NodeId det_step(Tape& tape, DetScheme scheme, double t, NodeId y, double dt,
                const TapeDriftFn& f) {
  switch (scheme) {
    case DetScheme::kEuler: return euler_step(tape, t, y, dt, f);
    case DetScheme::kMidpoint: return midpoint_step(tape, t, y, dt, f);
    case DetScheme::kRk4: return rk4_step(tape, t, y, dt, f);
  }
  throw ContractError("det_step: unknown scheme");
}

void PathRecord::write_csv(std::ostream& os) const {
  const std::size_t dw = w.empty() ? 0 : w.front().numel();
  const std::size_t dh = h.empty() ? 0 : h.front().numel();
  os << "t";
  for (std::size_t i = 1; i <= dw; ++i) os << ",w_" << i;
  for (std::size_t i = 1; i <= dh; ++i) os << ",h_" << i;
  os << ",kl_integrand\n";
  const auto prev = os.precision(17);
  for (std::size_t k = 0; k < times.size(); ++k) {
    os << times[k];
    for (std::size_t i = 0; i < dw; ++i) os << "," << w[k].data[i];
    for (std::size_t i = 0; i < dh; ++i) os << "," << h[k].data[i];
    os << "," << kl_integrand[k] << "\n";
  }
  os.precision(prev);
}

namespace {

// Joint (h, w) state helpers for the deterministic regimes.
struct HW {
  NodeId h;  // may be invalid (weights-only system)
  NodeId w;
};

HW hw_axpy(Tape& tape, const HW& y, const HW& k, double c) {
  HW out;
  if (y.h.valid()) out.h = tape.add(y.h, tape.scale(k.h, c));
  out.w = tape.add(y.w, tape.scale(k.w, c));
  return out;
}

HW joint_det_step(Tape& tape, DetScheme scheme, double t, const HW& y,
                  double dt, const JointSystem& sys) {
  auto drift = [&](double tt, const HW& s) {
    HW k;
    if (s.h.valid()) k.h = sys.fh->eval(tape, tt, s.h, s.w);
    k.w = sys.fq->eval(tape, tt, s.w);
    return k;
  };
  switch (scheme) {
    case DetScheme::kEuler:
      return hw_axpy(tape, y, drift(t, y), dt);
    case DetScheme::kMidpoint: {
      const HW k1 = drift(t, y);
      const HW mid = hw_axpy(tape, y, k1, dt * 0.5);
      const HW k2 = drift(t + dt * 0.5, mid);
      return hw_axpy(tape, y, k2, dt);
    }
    case DetScheme::kRk4: {
      const HW k1 = drift(t, y);
      const HW k2 = drift(t + dt * 0.5, hw_axpy(tape, y, k1, dt * 0.5));
      const HW k3 = drift(t + dt * 0.5, hw_axpy(tape, y, k2, dt * 0.5));
      const HW k4 = drift(t + dt, hw_axpy(tape, y, k3, dt));
      HW acc = hw_axpy(tape, y, k1, dt / 6.0);
      acc = hw_axpy(tape, acc, k2, dt / 3.0);
      acc = hw_axpy(tape, acc, k3, dt / 3.0);
      return hw_axpy(tape, acc, k4, dt / 6.0);
    }
  }
  throw ContractError("unknown scheme");
}

void check_finite(const Tape& tape, NodeId id, std::size_t step,
                  const char* what) {
  if (!tape.value(id).all_finite())
    throw NumericsError(std::string("non-finite ") + what +
                            " during integration",
                        step);
}

}  // namespace

IntegrateResult integrate_joint(Tape& tape, const JointSystem& system,
                                const RegimeSchedule& schedule,
                                const BrownianPath& noise, NodeId w0,
                                NodeId h0, const IntegrateOptions& opts) {
  if (!system.fq) throw ContractError("integrate_joint: missing weight drift");
  if (h0.valid() && !system.fh)
    throw ContractError("integrate_joint: hidden state given without f_h");
  const StepGrid grid = make_step_grid(schedule);
  const std::size_t dw = tape.value(w0).numel();

  const WeightPartition part = schedule.horizontal
                                   ? *schedule.horizontal
                                   : WeightPartition::all_stochastic(dw);
  part.validate(dw);
  const bool has_d = !part.d.empty();
  const bool s_is_all = part.d.empty();

  if (grid.num_inside > 0) {
    if (noise.num_steps != grid.num_inside || noise.dim != part.s.size())
      throw ContractError(
          "integrate_joint: Brownian path has " +
          std::to_string(noise.num_steps) + "x" + std::to_string(noise.dim) +
          " increments, window needs " + std::to_string(grid.num_inside) +
          "x" + std::to_string(part.s.size()));
    if (opts.with_kl && system.diffusion.sigma <= 0.0)
      throw ConfigError(
          "sigma = 0 inside a nonempty stochastic window: u_theta undefined");
  }
  const bool jump_applies = schedule.t2 < 1.0 && grid.num_inside > 0 &&
                            schedule.jump_mode != JumpMode::kContinue;
  if (jump_applies && !system.w_jump.valid())
    throw ContractError("integrate_joint: jump mode needs a w_t2 node");

  // inverse permutation for reassembling [S-block, D-block] into index order
  std::vector<std::uint32_t> inv_perm;
  if (has_d) {
    inv_perm.resize(dw);
    for (std::size_t i = 0; i < part.s.size(); ++i)
      inv_perm[part.s[i]] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < part.d.size(); ++i)
      inv_perm[part.d[i]] = static_cast<std::uint32_t>(part.s.size() + i);
  }
  auto combine = [&](NodeId ws, NodeId wd) {
    return tape.gather(tape.concat(ws, wd), inv_perm, {dw});
  };

  NodeId w = w0;
  NodeId h = h0;
  NodeId kl = tape.constant_scalar(0.0);
  const double sigma = system.diffusion.sigma;

  IntegrateResult result;
  const bool record_h =
      opts.record_path && h.valid() && tape.value(h).rank() == 1;
  if (opts.record_path) {
    result.record.times = grid.times;
    result.record.kl_integrand.assign(grid.times.size(), 0.0);
    result.record.w.push_back(tape.value(w));
    if (record_h) result.record.h.push_back(tape.value(h));
  }

  for (std::size_t k = 0; k < grid.num_steps(); ++k) {
    const double t = grid.times[k];
    const double dt = grid.times[k + 1] - grid.times[k];

    if (grid.inside(k)) {
      const std::size_t noise_row = k - grid.first_inside;
      const NodeId w_s = s_is_all ? w : tape.gather(w, part.s, {part.s.size()});
      // S-block drift; the split form never reads the D coordinates
      NodeId f_s;
      if (system.fq->is_split()) {
        f_s = system.fq->eval_s(tape, t, w_s);
      } else if (s_is_all) {
        f_s = system.fq->eval(tape, t, w);
      } else {
        f_s = tape.gather(system.fq->eval(tape, t, w), part.s,
                          {part.s.size()});
      }

      if (opts.with_kl) {
        // u = (f_p - f_q)/sigma on the stochastic block, left endpoint
        const NodeId prior = tape.scale(w_s, -system.prior_lambda);
        const NodeId u = tape.scale(tape.sub(prior, f_s), 1.0 / sigma);
        const NodeId usq = tape.sum(tape.square(u));
        add_u_theta_evals(1);
        if (opts.record_path)
          result.record.kl_integrand[k] = tape.value(usq).data[0];
        kl = tape.add(kl, tape.scale(usq, dt));
      }

      // hidden state: forward Euler against the left-endpoint weights
      if (h.valid())
        h = tape.add(h, tape.scale(system.fh->eval(tape, t, h, w), dt));

      // stochastic block: Euler–Maruyama
      Tensor noise_s = Tensor::zeros({part.s.size()});
      for (std::size_t i = 0; i < part.s.size(); ++i)
        noise_s.data[i] = sigma * noise.step(noise_row)[i];
      const NodeId w_s_new = tape.add(tape.add(w_s, tape.scale(f_s, dt)),
                                      tape.constant(std::move(noise_s)));

      if (has_d) {
        const NodeId w_d = tape.gather(w, part.d, {part.d.size()});
        NodeId w_d_new;
        if (system.fq->is_split()) {
          w_d_new = det_step(tape, schedule.scheme, t, w_d, dt,
                             [&](Tape& tp, double tt, NodeId v) {
                               return system.fq->eval_d(tp, tt, v);
                             });
        } else {
          // coupled drift: D advances with the stochastic block frozen at
          // the step's left endpoint
          w_d_new = det_step(tape, schedule.scheme, t, w_d, dt,
                             [&](Tape& tp, double tt, NodeId v) {
                               const NodeId full = combine(w_s, v);
                               return tp.gather(system.fq->eval(tp, tt, full),
                                                part.d, {part.d.size()});
                             });
        }
        w = combine(w_s_new, w_d_new);
      } else {
        w = w_s_new;
      }
    } else {
      const HW next =
          joint_det_step(tape, schedule.scheme, t, HW{h, w}, dt, system);
      h = next.h;
      w = next.w;
    }

    // the sampled w_t2 is replaced before the post-window regime starts
    if (jump_applies && grid.window_end(k + 1)) w = system.w_jump;

    check_finite(tape, w, k, "weight state");
    if (h.valid()) check_finite(tape, h, k, "hidden state");

    if (opts.record_path) {
      result.record.w.push_back(tape.value(w));
      if (record_h) result.record.h.push_back(tape.value(h));
    }
  }

  result.h1 = h;
  result.kl = kl;
  return result;
}

}  // namespace psdebnn
