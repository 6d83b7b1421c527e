// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "psdebnn/errors.hpp"
#include "psdebnn/solvers.hpp"

using namespace psdebnn;

TEST_CASE("step grid construction") {
  SUBCASE("cut points land exactly on boundaries") {
    RegimeSchedule s;
    s.t1 = 0.3;
    s.t2 = 0.6;
    s.num_steps = 60;
    const StepGrid g = make_step_grid(s);
    REQUIRE(g.times.size() == 61);
    CHECK(g.times.front() == 0.0);
    CHECK(g.times.back() == 1.0);
    CHECK(g.times[g.first_inside] == 0.3);
    CHECK(g.times[g.first_inside + g.num_inside] == 0.6);
    CHECK(g.num_inside == 18);  // 0.3 * 60
    CHECK(g.first_inside == 18);
  }
  SUBCASE("proportional allocation with a minimum of one step") {
    RegimeSchedule s;
    s.t1 = 0.001;
    s.t2 = 0.999;
    s.num_steps = 10;
    const StepGrid g = make_step_grid(s);
    CHECK(g.first_inside == 1);            // tiny head regime still steps once
    CHECK(g.num_inside == 8);
    CHECK(g.times[1] == 0.001);
    CHECK(g.times[9] == 0.999);
  }
  SUBCASE("no stochastic window") {
    RegimeSchedule s;
    s.t1 = 1.0;
    s.t2 = 1.0;
    s.num_steps = 7;
    const StepGrid g = make_step_grid(s);
    CHECK(g.num_inside == 0);
    CHECK(g.times.size() == 8);
  }
  SUBCASE("window covering everything") {
    RegimeSchedule s;
    s.t1 = 0.0;
    s.t2 = 1.0;
    s.num_steps = 5;
    const StepGrid g = make_step_grid(s);
    CHECK(g.num_inside == 5);
    CHECK(g.first_inside == 0);
  }
  SUBCASE("validation") {
    RegimeSchedule s;
    s.t1 = 0.4;
    s.t2 = 0.2;
    s.num_steps = 10;
    CHECK_THROWS_AS(make_step_grid(s), ConfigError);
    s.t1 = 0.2;
    s.t2 = 0.4;
    s.num_steps = 2;  // three nonempty regimes
    CHECK_THROWS_AS(make_step_grid(s), ConfigError);
  }
}

TEST_CASE("em_step") {
  WeightState w;
  w.w = Tensor::vec({0.0});

  SUBCASE("sigma = 0 degenerates to Euler") {
    const WeightState out =
        em_step(0.0, w, 0.25, Tensor::vec({2.0}), 0.0, Tensor::vec({0.9}));
    CHECK(out.w.data[0] == 0.5);
  }
  SUBCASE("pure diffusion step") {
    const WeightState out =
        em_step(0.0, w, 0.1, Tensor::vec({0.0}), 1.0, Tensor::vec({0.3}));
    CHECK(out.w.data[0] == 0.3);
  }
  SUBCASE("OU hand value") {
    // 1 - 0.1 + 0.2*(-0.05) = 0.89
    w.w = Tensor::vec({1.0});
    const WeightState out =
        em_step(0.0, w, 0.1, Tensor::vec({-1.0}), 0.2, Tensor::vec({-0.05}));
    CHECK(out.w.data[0] == doctest::Approx(0.89).epsilon(1e-15));
  }
  SUBCASE("no noise on deterministic coordinates") {
    WeightState wp;
    wp.w = Tensor::vec({0.0, 0.0});
    wp.partition = WeightPartition::leading(1, 2);
    const WeightState out = em_step(0.0, wp, 0.5, Tensor::vec({1.0, 1.0}), 2.0,
                                    Tensor::vec({0.25}));
    CHECK(out.w.data[0] == 0.5 + 2.0 * 0.25);
    CHECK(out.w.data[1] == 0.5);
  }
}

TEST_CASE("deterministic steppers") {
  Tape tape;
  SUBCASE("constant drift") {
    const NodeId y = tape.constant(Tensor::vec({1.0}));
    const NodeId out = midpoint_step(
        tape, 0.0, y, 0.5,
        [](Tape& t, double, NodeId) { return t.constant(Tensor::vec({3.0})); });
    CHECK(tape.value(out).data[0] == 2.5);
  }
  SUBCASE("dh/dt = h, one midpoint step of 0.1 gives 1.105") {
    const NodeId y = tape.constant(Tensor::vec({1.0}));
    const NodeId out = midpoint_step(
        tape, 0.0, y, 0.1, [](Tape&, double, NodeId s) { return s; });
    CHECK(tape.value(out).data[0] == doctest::Approx(1.105).epsilon(1e-15));
    // exact flow is e^0.1 = 1.10517...
  }
  SUBCASE("dw/dt = cos(20t) over [0, 0.3] with 60 midpoint steps") {
    NodeId y = tape.constant(Tensor::vec({0.0}));
    const double dt = 0.3 / 60.0;
    auto drift = [](Tape& t, double tt, NodeId) {
      return t.constant(Tensor::vec({std::cos(20.0 * tt)}));
    };
    for (int k = 0; k < 60; ++k)
      y = midpoint_step(tape, k * dt, y, dt, drift);
    // antiderivative oracle sin(20t)/20
    CHECK(tape.value(y).data[0] ==
          doctest::Approx(std::sin(6.0) / 20.0).epsilon(1e-4));
    CHECK(std::sin(6.0) / 20.0 == doctest::Approx(-0.013971).epsilon(1e-4));
  }
}

TEST_CASE("sample_brownian") {
  SUBCASE("empty path") {
    const BrownianPath p = sample_brownian(1, 0, 3, 0.0);
    CHECK(p.increments.numel() == 0);
  }
  SUBCASE("same seed is bitwise identical") {
    const BrownianPath a = sample_brownian(42, 16, 2, 0.01);
    const BrownianPath b = sample_brownian(42, 16, 2, 0.01);
    CHECK(a.increments.data == b.increments.data);
    const BrownianPath c = sample_brownian(43, 16, 2, 0.01);
    CHECK(a.increments.data != c.increments.data);
  }
  SUBCASE("moments at fixed seed") {
    const std::size_t n = 100000;
    const double dt = 0.01;
    const BrownianPath p = sample_brownian(7, n, 1, dt);
    double mean = 0.0, var = 0.0;
    for (double v : p.increments.data) mean += v;
    mean /= static_cast<double>(n);
    for (double v : p.increments.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    CHECK(std::fabs(mean) <= 3.0 * std::sqrt(dt) / std::sqrt(double(n)));
    CHECK(var == doctest::Approx(dt).epsilon(0.05));
  }
}

namespace {

struct ConstantDrift final : WeightDrift {
  double value;
  std::size_t dim;
  ConstantDrift(double v, std::size_t d) : value(v), dim(d) {}
  NodeId eval(Tape& tape, double, NodeId) const override {
    return tape.constant(Tensor::full({dim}, value));
  }
};

PathRecord integrate_toy(const WeightDrift& drift, const RegimeSchedule& sched,
                         double sigma, std::uint64_t seed,
                         std::vector<double> w0, double prior_lambda = 0.0,
                         bool with_kl = false) {
  Tape tape;
  JointSystem sys;
  sys.fq = &drift;
  sys.diffusion = DiffusionSpec{sigma, sched.t1, sched.t2};
  sys.prior_lambda = prior_lambda;
  if (sched.jump_mode != JumpMode::kContinue)
    sys.w_jump = tape.constant(Tensor::zeros({w0.size()}));
  const StepGrid grid = make_step_grid(sched);
  const std::size_t dim = sched.horizontal ? sched.horizontal->s.size()
                                           : w0.size();
  const double dt = grid.num_inside == 0
                        ? 0.0
                        : (sched.t2 - sched.t1) / double(grid.num_inside);
  const BrownianPath noise = sample_brownian(seed, grid.num_inside, dim, dt);
  IntegrateOptions opts;
  opts.with_kl = with_kl;
  opts.record_path = true;
  const auto res = integrate_joint(tape, sys, sched, noise,
                                   tape.constant(Tensor::vec(std::move(w0))),
                                   NodeId{}, opts);
  return res.record;
}

RegimeSchedule cosine_schedule(JumpMode jump) {
  RegimeSchedule s;
  s.t1 = 0.3;
  s.t2 = 0.6;
  s.num_steps = 120;
  s.jump_mode = jump;
  s.scheme = DetScheme::kMidpoint;
  return s;
}

}  // namespace

TEST_CASE("fixed jump makes the tail deterministic, continue keeps it random") {
  const CosineBurstDrift drift(1, 0.3, 0.6);

  SUBCASE("fixed: tail identical across 10 seeds, exactly") {
    const RegimeSchedule sched = cosine_schedule(JumpMode::kFixedAPriori);
    const PathRecord base = integrate_toy(drift, sched, 1.0, 0, {0.0});
    const StepGrid grid = make_step_grid(sched);
    const std::size_t t2_idx = grid.first_inside + grid.num_inside;
    for (std::uint64_t seed = 1; seed < 10; ++seed) {
      const PathRecord rec = integrate_toy(drift, sched, 1.0, seed, {0.0});
      for (std::size_t k = t2_idx; k < rec.w.size(); ++k)
        CHECK(rec.w[k].data == base.w[k].data);  // max abs deviation 0
    }
  }
  SUBCASE("continue: w_1 varies across seeds") {
    const RegimeSchedule sched = cosine_schedule(JumpMode::kContinue);
    double mean = 0.0, sq = 0.0;
    const int n = 100;
    for (int seed = 0; seed < n; ++seed) {
      const PathRecord rec = integrate_toy(drift, sched, 1.0, seed, {0.0});
      const double w1 = rec.w.back().data[0];
      mean += w1;
      sq += w1 * w1;
    }
    mean /= n;
    const double stddev = std::sqrt(sq / n - mean * mean);
    CHECK(stddev > 0.01);
  }
  SUBCASE("before t1 every seed agrees bitwise") {
    const RegimeSchedule sched = cosine_schedule(JumpMode::kContinue);
    const PathRecord a = integrate_toy(drift, sched, 1.0, 3, {0.0});
    const PathRecord b = integrate_toy(drift, sched, 1.0, 77, {0.0});
    const StepGrid grid = make_step_grid(sched);
    for (std::size_t k = 0; k <= grid.first_inside; ++k)
      CHECK(a.w[k].data == b.w[k].data);
  }
}

TEST_CASE("horizontal cut: split drift keeps D deterministic and exact") {
  RegimeSchedule sched;
  sched.t1 = 0.0;
  sched.t2 = 1.0;
  sched.num_steps = 60;
  sched.scheme = DetScheme::kMidpoint;
  sched.horizontal = WeightPartition::leading(1, 2);

  SUBCASE("split: D follows the closed form and ignores the seed") {
    const ToySplitDrift drift;
    const PathRecord base = integrate_toy(drift, sched, 1.0, 0, {0.0, 0.0});
    // closed form (w_D(0)+1) e^t - t - 1
    for (std::size_t k = 0; k < base.times.size(); ++k) {
      const double t = base.times[k];
      CHECK(base.w[k].data[1] ==
            doctest::Approx(std::exp(t) - t - 1.0).epsilon(1e-3));
    }
    for (std::uint64_t seed = 1; seed < 6; ++seed) {
      const PathRecord rec = integrate_toy(drift, sched, 1.0, seed, {0.0, 0.0});
      for (std::size_t k = 0; k < rec.w.size(); ++k)
        CHECK(rec.w[k].data[1] == base.w[k].data[1]);  // bitwise
    }
  }
  SUBCASE("coupled: D inherits randomness through the drift") {
    const ToyCoupledDrift drift;
    double mean = 0.0, sq = 0.0;
    const int n = 30;
    for (int seed = 0; seed < n; ++seed) {
      const PathRecord rec = integrate_toy(drift, sched, 1.0, seed, {0.0, 0.0});
      const double wd = rec.w.back().data[1];
      mean += wd;
      sq += wd * wd;
    }
    mean /= n;
    CHECK(sq / n - mean * mean > 0.0);
  }
}

TEST_CASE("sigma -> 0 recovers the deterministic trajectory") {
  RegimeSchedule sched;
  sched.t1 = 0.2;
  sched.t2 = 0.8;
  sched.num_steps = 60;
  const ConstantDrift drift(0.7, 2);
  const PathRecord ode = integrate_toy(drift, sched, 0.0, 5, {0.1, -0.2});
  const PathRecord sde = integrate_toy(drift, sched, 1e-8, 5, {0.1, -0.2});
  for (std::size_t k = 0; k < ode.w.size(); ++k)
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(std::fabs(ode.w[k].data[i] - sde.w[k].data[i]) < 1e-4);
}

TEST_CASE("midpoint halving shrinks the error by about 4") {
  auto solve = [](std::size_t steps) {
    RegimeSchedule sched;
    sched.t1 = 1.0;  // pure ODE over [0,1]
    sched.t2 = 1.0;
    sched.num_steps = steps;
    sched.scheme = DetScheme::kMidpoint;
    const CosineBurstDrift drift(1, 2.0, 3.0);  // window never active
    const PathRecord rec = integrate_toy(drift, sched, 0.0, 0, {0.0});
    return rec.w.back().data[0];
  };
  const double exact = std::sin(20.0) / 20.0;
  const double e60 = std::fabs(solve(60) - exact);
  const double e120 = std::fabs(solve(120) - exact);
  const double ratio = e60 / e120;
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("tape EM trajectory equals repeated em_step") {
  RegimeSchedule sched;
  sched.t1 = 0.0;
  sched.t2 = 1.0;
  sched.num_steps = 16;
  const ConstantDrift drift(0.3, 1);
  const double sigma = 0.5;
  const PathRecord rec = integrate_toy(drift, sched, sigma, 9, {0.2});

  const BrownianPath noise = sample_brownian(9, 16, 1, 1.0 / 16.0);
  WeightState w;
  w.w = Tensor::vec({0.2});
  for (std::size_t k = 0; k < 16; ++k) {
    w = em_step(k / 16.0, w, 1.0 / 16.0, Tensor::vec({0.3}), sigma,
                Tensor::vec({noise.step(k)[0]}));
    CHECK(rec.w[k + 1].data[0] == doctest::Approx(w.w.data[0]).epsilon(1e-15));
  }
}

TEST_CASE("integrate_joint validation") {
  RegimeSchedule sched;
  sched.t1 = 0.0;
  sched.t2 = 1.0;
  sched.num_steps = 8;
  const ConstantDrift drift(0.0, 1);

  SUBCASE("sigma = 0 with KL accumulation is rejected") {
    Tape tape;
    JointSystem sys;
    sys.fq = &drift;
    sys.diffusion = DiffusionSpec{0.0, 0.0, 1.0};
    const BrownianPath noise = sample_brownian(0, 8, 1, 1.0 / 8.0);
    IntegrateOptions opts;
    opts.with_kl = true;
    CHECK_THROWS_AS(integrate_joint(tape, sys, sched, noise,
                                    tape.constant(Tensor::vec({0.0})), NodeId{},
                                    opts),
                    ConfigError);
  }
  SUBCASE("noise shape must match the window") {
    Tape tape;
    JointSystem sys;
    sys.fq = &drift;
    sys.diffusion = DiffusionSpec{1.0, 0.0, 1.0};
    const BrownianPath noise = sample_brownian(0, 4, 1, 0.25);
    CHECK_THROWS_AS(integrate_joint(tape, sys, sched, noise,
                                    tape.constant(Tensor::vec({0.0})), NodeId{},
                                    {}),
                    ContractError);
  }
}

TEST_CASE("kl accumulates ||u||^2 dt at left endpoints") {
  // constant drift gap c with sigma=1 and lambda=0: kl = c^2 (t2-t1)
  RegimeSchedule sched;
  sched.t1 = 0.25;
  sched.t2 = 0.75;
  sched.num_steps = 40;
  const ConstantDrift drift(-1.5, 1);  // u = (0 - f_q)/1 = 1.5

  Tape tape;
  JointSystem sys;
  sys.fq = &drift;
  sys.diffusion = DiffusionSpec{1.0, sched.t1, sched.t2};
  sys.prior_lambda = 0.0;
  const StepGrid grid = make_step_grid(sched);
  const BrownianPath noise = sample_brownian(
      3, grid.num_inside, 1, (sched.t2 - sched.t1) / double(grid.num_inside));
  IntegrateOptions opts;
  opts.with_kl = true;
  opts.record_path = true;
  const auto res =
      integrate_joint(tape, sys, sched, noise,
                      tape.constant(Tensor::vec({0.0})), NodeId{}, opts);
  CHECK(tape.value(res.kl).data[0] ==
        doctest::Approx(1.5 * 1.5 * 0.5).epsilon(1e-12));
  // the record holds the raw integrand per inside step
  CHECK(res.record.kl_integrand[grid.first_inside] ==
        doctest::Approx(2.25).epsilon(1e-12));
  CHECK(res.record.kl_integrand[0] == 0.0);
  CHECK(res.record.kl_integrand.back() == 0.0);
}

TEST_CASE("path record CSV header") {
  RegimeSchedule sched;
  sched.t1 = 0.0;
  sched.t2 = 1.0;
  sched.num_steps = 4;
  const ConstantDrift drift(0.0, 2);
  const PathRecord rec = integrate_toy(drift, sched, 1.0, 0, {0.0, 0.0});
  std::ostringstream os;
  rec.write_csv(os);
  const std::string text = os.str();
  CHECK(text.substr(0, text.find('\n')) == "t,w_1,w_2,kl_integrand");
  // one row per step boundary plus the header
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}
