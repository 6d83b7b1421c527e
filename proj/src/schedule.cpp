// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/schedule.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "psdebnn/errors.hpp"

namespace psdebnn {

std::string to_string(JumpMode m) {
  switch (m) {
    case JumpMode::kContinue: return "continue";
    case JumpMode::kFixedAPriori: return "fixed_a_priori";
    case JumpMode::kLearnable: return "learnable";
  }
  return "?";
}

std::string to_string(DetScheme s) {
  switch (s) {
    case DetScheme::kEuler: return "euler";
    case DetScheme::kMidpoint: return "midpoint";
    case DetScheme::kRk4: return "rk4";
  }
  return "?";
}

JumpMode jump_mode_from_string(const std::string& s) {
  if (s == "continue") return JumpMode::kContinue;
  if (s == "fixed_a_priori" || s == "fixed") return JumpMode::kFixedAPriori;
  if (s == "learnable") return JumpMode::kLearnable;
  throw ConfigError("unknown jump mode '" + s + "'");
}

DetScheme det_scheme_from_string(const std::string& s) {
  if (s == "euler") return DetScheme::kEuler;
  if (s == "midpoint") return DetScheme::kMidpoint;
  if (s == "rk4") return DetScheme::kRk4;
  throw ConfigError("unknown deterministic scheme '" + s + "'");
}

void RegimeSchedule::validate() const {
  if (!(t1 >= 0.0 && t1 <= t2 && t2 <= 1.0))
    throw ConfigError("schedule: need 0 <= t1 <= t2 <= 1, got t1=" +
                      std::to_string(t1) + " t2=" + std::to_string(t2));
  if (num_steps == 0) throw ConfigError("schedule: num_steps must be >= 1");
  std::size_t nonempty = 0;
  for (double len : {t1 - 0.0, t2 - t1, 1.0 - t2})
    if (len > 0.0) ++nonempty;
  if (nonempty == 0) throw ConfigError("schedule: degenerate time interval");
  if (num_steps < nonempty)
    throw ConfigError("schedule: num_steps smaller than the number of "
                      "nonempty regimes");
}

StepGrid make_step_grid(const RegimeSchedule& schedule) {
  schedule.validate();
  const std::array<double, 3> bounds_lo{0.0, schedule.t1, schedule.t2};
  const std::array<double, 3> bounds_hi{schedule.t1, schedule.t2, 1.0};
  std::array<double, 3> len{};
  for (int r = 0; r < 3; ++r) len[r] = bounds_hi[r] - bounds_lo[r];

  // proportional allocation with largest-remainder rounding, then at least
  // one step for every nonempty regime
  std::array<std::size_t, 3> n{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int r = 0; r < 3; ++r) {
    if (len[r] <= 0.0) continue;
    const double ideal = schedule.num_steps * len[r];
    n[r] = static_cast<std::size_t>(std::floor(ideal));
    frac[r] = ideal - static_cast<double>(n[r]);
    assigned += n[r];
  }
  while (assigned < schedule.num_steps) {
    int best = -1;
    for (int r = 0; r < 3; ++r)
      if (len[r] > 0.0 && (best < 0 || frac[r] > frac[best])) best = r;
    ++n[best];
    frac[best] = -1.0;
    ++assigned;
  }
  for (int r = 0; r < 3; ++r) {
    while (len[r] > 0.0 && n[r] == 0) {
      int donor = -1;
      for (int q = 0; q < 3; ++q)
        if (n[q] > 1 && (donor < 0 || n[q] > n[donor])) donor = q;
      --n[donor];
      ++n[r];
    }
  }

  StepGrid grid;
  grid.times.reserve(schedule.num_steps + 1);
  grid.times.push_back(0.0);
  for (int r = 0; r < 3; ++r) {
    if (len[r] <= 0.0) continue;
    for (std::size_t k = 1; k < n[r]; ++k)
      grid.times.push_back(bounds_lo[r] +
                           len[r] * static_cast<double>(k) /
                               static_cast<double>(n[r]));
    grid.times.push_back(bounds_hi[r]);  // regime boundary lands exactly
  }
  grid.first_inside = (len[0] > 0.0) ? n[0] : 0;
  grid.num_inside = (len[1] > 0.0) ? n[1] : 0;
  return grid;
}

}  // namespace psdebnn
