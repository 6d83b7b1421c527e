// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "psdebnn/dynamics.hpp"

namespace psdebnn {

// What happens to w when the stochastic window ends before depth 1: keep the
// sampled value, reset to a fixed vector, or reset to a trainable one.
enum class JumpMode { kContinue, kFixedAPriori, kLearnable };

enum class DetScheme { kEuler, kMidpoint, kRk4 };

std::string to_string(JumpMode m);
std::string to_string(DetScheme s);
JumpMode jump_mode_from_string(const std::string& s);
DetScheme det_scheme_from_string(const std::string& s);

// The partition plan: cut points, jump behaviour, optional horizontal index
// sets, solver step budget and deterministic scheme.
struct RegimeSchedule {
  double t1 = 0.0;
  double t2 = 0.0;
  JumpMode jump_mode = JumpMode::kContinue;
  std::size_t num_steps = 0;
  DetScheme scheme = DetScheme::kMidpoint;
  std::optional<WeightPartition> horizontal;

  double stochasticity_ratio() const { return t2 - t1; }
  bool sde_first() const { return t1 == 0.0; }
  bool ode_first() const { return t2 == 1.0; }

  void validate() const;  // ConfigError
};

// Fixed step grid over [0,1] with t1 and t2 exactly on step boundaries.
// num_steps is split across the nonempty regimes proportionally to their
// lengths, at least one step each.
struct StepGrid {
  std::vector<double> times;     // num_steps + 1 boundaries
  std::size_t first_inside = 0;  // index of the first step inside (t1,t2)
  std::size_t num_inside = 0;

  std::size_t num_steps() const { return times.size() - 1; }
  bool inside(std::size_t k) const {
    return k >= first_inside && k < first_inside + num_inside;
  }
  // true when step boundary index b is the end of the stochastic window
  bool window_end(std::size_t b) const {
    return num_inside > 0 && b == first_inside + num_inside;
  }
};

StepGrid make_step_grid(const RegimeSchedule& schedule);

}  // namespace psdebnn
