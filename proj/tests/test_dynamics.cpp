// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "psdebnn/dynamics.hpp"
#include "psdebnn/errors.hpp"

using namespace psdebnn;

namespace {

// Independent of the tape path: plain forward pass over the canonical
// packing, used as the evaluation oracle.
std::vector<double> mlp_oracle(const std::vector<std::size_t>& widths,
                               bool time_input,
                               const std::vector<double>& flat,
                               std::vector<double> x, double t) {
  if (time_input) x.push_back(t);
  std::size_t off = 0;
  std::size_t in = x.size();
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const std::size_t out = widths[l];
    std::vector<double> y(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < in; ++c) acc += flat[off + r * in + c] * x[c];
      acc += flat[off + out * in + r];
      y[r] = acc;
    }
    off += out * in + out;
    if (l + 1 < widths.size())
      for (double& v : y) v = std::fmax(v, 0.0) + std::log1p(std::exp(-std::fabs(v)));
    x = std::move(y);
    in = x.size();
  }
  return x;
}

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed,
                     double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = dist(rng);
  return t;
}

}  // namespace

TEST_CASE("parameter counts") {
  // 2-8-2 with time input becomes 3-8-2: 3*8+8 + 8*2+2 = 50
  MlpSpec spec{{2, 8, 2}, true};
  CHECK(spec.param_count() == 50);
  MlpSpec no_time{{2, 8, 2}, false};
  CHECK(no_time.param_count() == 2 * 8 + 8 + 8 * 2 + 2);
}

TEST_CASE("spec validation") {
  MlpSpec no_hidden{{4, 4}, true};
  CHECK_THROWS_AS(no_hidden.validate(), ConfigError);
  MlpSpec zero_width{{2, 0, 2}, true};
  CHECK_THROWS_AS(zero_width.validate(), ConfigError);
}

TEST_CASE("flatten/unflatten round-trip is bitwise") {
  MlpSpec spec{{3, 5, 2}, true};
  const Tensor flat = random_tensor({spec.param_count()}, 42);
  const MlpParams p = mlp_unflatten(spec, flat);
  const Tensor back = mlp_flatten(spec, p);
  CHECK(back.data == flat.data);
  CHECK(p.weights[0].shape == std::vector<std::size_t>{5, 4});
  CHECK(p.biases[1].shape == std::vector<std::size_t>{2});
}

TEST_CASE("mlp_apply matches the direct oracle") {
  MlpSpec spec{{2, 4, 3}, true};
  const Tensor flat = random_tensor({spec.param_count()}, 7);
  const std::vector<double> x{0.3, -1.1};
  const double t = 0.45;
  const auto expect = mlp_oracle(spec.widths, true, flat.data, x, t);

  Tape tape;
  const NodeId p = tape.leaf(flat);
  const NodeId out = mlp_apply(tape, spec, p, tape.constant(Tensor::vec(x)), t);
  REQUIRE(tape.value(out).numel() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(tape.value(out).data[i] == doctest::Approx(expect[i]).epsilon(1e-12));

  SUBCASE("batch rows equal vector evaluations") {
    Tape tb;
    const NodeId pb = tb.leaf(flat);
    const Tensor xb = Tensor::matrix(2, 2, {0.3, -1.1, 0.9, 0.2});
    const NodeId outb = mlp_apply(tb, spec, pb, tb.constant(xb), t);
    const auto row1 = mlp_oracle(spec.widths, true, flat.data, {0.3, -1.1}, t);
    const auto row2 = mlp_oracle(spec.widths, true, flat.data, {0.9, 0.2}, t);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(tb.value(outb).at(0, j) == doctest::Approx(row1[j]).epsilon(1e-12));
      CHECK(tb.value(outb).at(1, j) == doctest::Approx(row2[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("all-zero parameters give the zero map") {
  MlpSpec spec{{2, 4, 2}, true};
  Tape tape;
  const NodeId p = tape.constant(Tensor::zeros({spec.param_count()}));
  const NodeId out =
      mlp_apply(tape, spec, p, tape.constant(Tensor::vec({0.7, -0.4})), 0.2);
  // oracle: zero affine maps collapse every layer
  const auto expect = mlp_oracle(spec.widths, true,
                                 std::vector<double>(spec.param_count(), 0.0),
                                 {0.7, -0.4}, 0.2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(tape.value(out).data[i] == expect[i]);
    CHECK(tape.value(out).data[i] == 0.0);
  }
}

TEST_CASE("single affine layer packs (A, b) with a trailing time column") {
  // identity weights on the state part, zero time column, zero bias
  MlpSpec spec{{2, 2}, true};  // degenerate: one linear layer
  Tensor flat = Tensor::zeros({spec.param_count()});
  flat.data = {1, 0, 0,   // row 0 of A | t-column
               0, 1, 0,   // row 1
               0, 0};     // bias
  Tape tape;
  const NodeId out = mlp_apply(tape, spec, tape.constant(flat),
                               tape.constant(Tensor::vec({1.0, 0.0})), 17.3);
  CHECK(tape.value(out).data == std::vector<double>{1.0, 0.0});
}

TEST_CASE("parameter count mismatch raises ConfigError") {
  MlpSpec spec{{2, 4, 2}, true};
  Tape tape;
  const NodeId bad = tape.constant(Tensor::zeros({spec.param_count() - 1}));
  CHECK_THROWS_AS(
      mlp_apply(tape, spec, bad, tape.constant(Tensor::vec({1, 2})), 0.0),
      ConfigError);
}

TEST_CASE("augment_input") {
  const HiddenState a = augment_input(Tensor::vec({1, 2}), 2);
  CHECK(a.h.data == std::vector<double>{1, 2, 0, 0});
  const HiddenState b = augment_input(Tensor::vec({3, 4}), 0);
  CHECK(b.h.data == std::vector<double>{3, 4});
  const HiddenState c = augment_input(Tensor::vec({}), 3);
  CHECK(c.h.data == std::vector<double>{0, 0, 0});
}

TEST_CASE("OU prior drift") {
  WeightState w;
  w.w = Tensor::vec({2.0});
  CHECK(f_p_eval(0.0, w, 1.0).data == std::vector<double>{-2.0});
  w.w = Tensor::vec({0.0, 0.0});
  CHECK(f_p_eval(0.5, w, 1.0).data == std::vector<double>{0.0, 0.0});
  w.w = Tensor::vec({1.0, -4.0});
  const Tensor d = f_p_eval(0.0, w, 0.5);
  CHECK(d.data == std::vector<double>{-0.5, 2.0});

  SUBCASE("zero on deterministic coordinates") {
    WeightState part;
    part.w = Tensor::vec({1.0, -4.0});
    part.partition = WeightPartition::leading(1, 2);
    const Tensor dp = f_p_eval(0.0, part, 0.5);
    CHECK(dp.data == std::vector<double>{-0.5, 0.0});
  }
}

TEST_CASE("toy drifts") {
  Tape tape;
  SUBCASE("cosine burst is 1 at t=0 and 0 inside the window") {
    CosineBurstDrift drift(1, 0.3, 0.6);
    const NodeId w = tape.constant(Tensor::vec({0.0}));
    CHECK(tape.value(drift.eval(tape, 0.0, w)).data[0] == 1.0);
    CHECK(tape.value(drift.eval(tape, 0.45, w)).data[0] == 0.0);
    // steps starting at t1 belong to the window, steps starting at t2 do not
    CHECK(tape.value(drift.eval(tape, 0.3, w)).data[0] == 0.0);
    CHECK(tape.value(drift.eval(tape, 0.6, w)).data[0] ==
          doctest::Approx(std::cos(12.0)));
  }
  SUBCASE("coupled 2-d drift at (t=0, w_s=1, w_d=0) is (-1, 1)") {
    ToyCoupledDrift drift;
    const NodeId w = tape.constant(Tensor::vec({1.0, 0.0}));
    const Tensor out = tape.value(drift.eval(tape, 0.0, w));
    CHECK(out.data == std::vector<double>{-1.0, 1.0});
  }
  SUBCASE("split 2-d drift") {
    ToySplitDrift drift;
    const NodeId w = tape.constant(Tensor::vec({2.0, 3.0}));
    const Tensor out = tape.value(drift.eval(tape, 0.5, w));
    CHECK(out.data == std::vector<double>{-2.0, 3.5});
  }
}

TEST_CASE("zero-initialized final layer means zero drift") {
  MlpSpec spec{{3, 8, 3}, true};
  std::mt19937_64 rng(5);
  const Tensor theta = mlp_init(spec, rng, /*zero_final=*/true);
  Tape tape;
  const NodeId th = tape.leaf(theta);
  MlpWeightDrift drift(spec, th, /*prior_lambda=*/0.0);
  for (std::uint64_t s = 0; s < 4; ++s) {
    const NodeId w = tape.constant(random_tensor({3}, 100 + s));
    const Tensor out = tape.value(drift.eval(tape, 0.31 * double(s), w));
    for (double v : out.data) CHECK(v == 0.0);
  }
}

TEST_CASE("prior residual starts exactly on the OU drift") {
  MlpSpec spec{{3, 8, 3}, true};
  std::mt19937_64 rng(6);
  const Tensor theta = mlp_init(spec, rng, /*zero_final=*/true);
  Tape tape;
  const NodeId th = tape.leaf(theta);
  MlpWeightDrift drift(spec, th, /*prior_lambda=*/1.0);
  const Tensor w = random_tensor({3}, 9);
  const Tensor out = tape.value(drift.eval(tape, 0.2, tape.constant(w)));
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.data[i] == -w.data[i]);
}

TEST_CASE("split drift: D block is exactly invariant to S perturbations") {
  const WeightPartition part = WeightPartition::leading(2, 5);
  MlpSpec s_spec{{2, 6, 2}, true};
  MlpSpec d_spec{{3, 6, 3}, true};
  std::mt19937_64 rng(11);
  const Tensor theta_s = mlp_init(s_spec, rng, false);
  const Tensor theta_d = mlp_init(d_spec, rng, false);

  auto d_block = [&](const Tensor& w) {
    Tape tape;
    SplitMlpWeightDrift drift(s_spec, tape.leaf(theta_s), d_spec,
                              tape.leaf(theta_d), part, 1.0);
    const Tensor full = tape.value(drift.eval(tape, 0.37, tape.constant(w)));
    return std::vector<double>(full.data.begin() + 2, full.data.end());
  };
  Tensor w = random_tensor({5}, 21);
  const auto base = d_block(w);
  std::mt19937_64 prng(77);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor w2 = w;
    w2.data[0] = dist(prng);
    w2.data[1] = dist(prng);
    CHECK(d_block(w2) == base);  // bitwise
  }
}

TEST_CASE("f_h stays finite with bounded inputs, and so does its Jacobian") {
  MlpSpec spec{{4, 8, 4}, true};
  std::mt19937_64 rng(3);
  Tensor w = Tensor::zeros({spec.param_count()});
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (double& v : w.data) v = dist(rng);

  MlpHiddenDrift fh(spec);
  for (int rep = 0; rep < 8; ++rep) {
    Tensor h = random_tensor({4}, 200 + rep, 1.0);
    double norm = 0;
    for (double v : h.data) norm += v * v;
    const double target = 10.0 / std::sqrt(std::max(norm, 1e-12));
    for (double& v : h.data) v *= target;  // ||h|| = 10

    Tape tape;
    const NodeId wn = tape.leaf(w);
    const NodeId hn = tape.leaf(h);
    const NodeId out = fh.eval(tape, 0.5, hn, wn);
    CHECK(tape.value(out).all_finite());
    const auto g = tape.backward(tape.sum(out));
    CHECK(g[hn.v].all_finite());
    CHECK(g[wn.v].all_finite());
  }
}

TEST_CASE("partition validation") {
  CHECK_THROWS_AS(WeightPartition::leading(7, 5), ConfigError);
  WeightPartition bad;
  bad.s = {0, 1};
  bad.d = {1, 2};
  CHECK_THROWS_AS(bad.validate(3), ConfigError);
  const WeightPartition ok = WeightPartition::leading(2, 4);
  ok.validate(4);
  CHECK(ok.s == std::vector<std::uint32_t>{0, 1});
  CHECK(ok.d == std::vector<std::uint32_t>{2, 3});
}
