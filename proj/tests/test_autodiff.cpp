// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "psdebnn/errors.hpp"
#include "psdebnn/grad_check.hpp"
#include "psdebnn/tape.hpp"

using namespace psdebnn;

TEST_CASE("forward op values") {
  Tape tape;

  SUBCASE("softplus at 0 is ln 2") {
    const NodeId x = tape.leaf(Tensor::scalar(0.0));
    CHECK(tape.value(tape.softplus(x)).data[0] ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("matmul by identity") {
    const NodeId eye = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    const NodeId v = tape.leaf(Tensor::vec({3.0, -1.5}));
    const Tensor& out = tape.value(tape.matmul(eye, v));
    CHECK(out.data[0] == 3.0);
    CHECK(out.data[1] == -1.5);
  }
  SUBCASE("cos(20 * 0.3) = cos 6") {
    const NodeId t = tape.leaf(Tensor::scalar(20.0 * 0.3));
    // oracle: scalar evaluation
    CHECK(tape.value(tape.cos(t)).data[0] ==
          doctest::Approx(0.96017028665036602054).epsilon(1e-14));
  }
  SUBCASE("concat and slice") {
    const NodeId a = tape.leaf(Tensor::vec({1, 2}));
    const NodeId b = tape.leaf(Tensor::vec({3}));
    const NodeId c = tape.concat(a, b);
    CHECK(tape.value(c).data == std::vector<double>{1, 2, 3});
    const NodeId s = tape.slice(c, 1, {2});
    CHECK(tape.value(s).data == std::vector<double>{2, 3});
  }
  SUBCASE("errors") {
    const NodeId a = tape.leaf(Tensor::vec({1, 2}));
    const NodeId b = tape.leaf(Tensor::vec({1, 2, 3}));
    CHECK_THROWS_AS(tape.add(a, b), ShapeError);
    CHECK_THROWS_AS(tape.log(tape.leaf(Tensor::vec({1.0, -2.0}))),
                    DomainError);
    CHECK_THROWS_AS(tape.matmul(a, b), ShapeError);
  }
}

TEST_CASE("backward basics") {
  SUBCASE("loss = sum(w*w), w=(1,2) -> grad (2,4)") {
    Tape tape;
    const NodeId w = tape.leaf(Tensor::vec({1, 2}));
    const NodeId loss = tape.sum(tape.mul(w, w));
    const auto g = tape.backward(loss);
    CHECK(g[w.v].data == std::vector<double>{2, 4});
    CHECK(g[loss.v].data[0] == 1.0);  // d loss / d loss
  }
  SUBCASE("softplus'(0) = 0.5") {
    Tape tape;
    const NodeId x = tape.leaf(Tensor::scalar(0.0));
    const auto g = tape.backward(tape.softplus(x));
    CHECK(g[x.v].data[0] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("non-scalar loss rejected") {
    Tape tape;
    const NodeId w = tape.leaf(Tensor::vec({1, 2}));
    CHECK_THROWS_AS(tape.backward(tape.mul(w, w)), ContractError);
  }
}

TEST_CASE("grad_check harness") {
  SUBCASE("f(x) = x^2 at x = 3: exact up to rounding") {
    const auto rep = grad_check(
        [](Tape& t, NodeId p) { return t.sum(t.square(p)); },
        Tensor::scalar(3.0), 1e-5, 1e-6);
    CHECK(rep.passed);
    CHECK(rep.analytic[0] == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(rep.max_rel_err < 1e-6);
  }
  SUBCASE("constant function has exactly zero gradient") {
    const auto rep = grad_check(
        [](Tape& t, NodeId) { return t.constant_scalar(4.2); },
        Tensor::vec({1.0, 2.0, 3.0}), 1e-5, 1e-6);
    CHECK(rep.passed);
    for (double g : rep.analytic) CHECK(g == 0.0);
    for (double g : rep.numeric) CHECK(g == 0.0);
  }
  SUBCASE("step must be positive") {
    CHECK_THROWS_AS(grad_check([](Tape& t, NodeId p) { return t.sum(p); },
                               Tensor::vec({1.0}), 0.0, 1e-4),
                    ContractError);
  }
}

TEST_CASE("2-layer softplus MLP matches finite differences") {
  // in 2 -> hidden 4 -> out 1, all parameters checked at once
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor params = Tensor::zeros({2 * 4 + 4 + 4 * 1 + 1});
  for (double& v : params.data) v = dist(rng);
  const Tensor x = Tensor::vec({0.7, -0.3});

  const auto rep = grad_check(
      [&](Tape& t, NodeId p) {
        const NodeId w1 = t.slice(p, 0, {4, 2});
        const NodeId b1 = t.slice(p, 8, {4});
        const NodeId w2 = t.slice(p, 12, {1, 4});
        const NodeId b2 = t.slice(p, 16, {1});
        const NodeId xin = t.constant(x);
        const NodeId h = t.softplus(t.add(t.matmul(w1, xin), b1));
        return t.sum(t.add(t.matmul(w2, h), b2));
      },
      params, 1e-5, 1e-4);
  CHECK(rep.passed);
  CHECK(rep.max_rel_err < 1e-4);
}

namespace {

struct PrimitiveCase {
  const char* name;
  std::vector<std::size_t> shape;
  double lo, hi;
  ScalarTapeFn fn;
};

std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> cases;
  auto other_vec = [](Tape& t) {
    return t.constant(Tensor::vec({0.4, -1.1, 0.9, 1.7}));
  };
  cases.push_back({"add", {4}, -2, 2, [=](Tape& t, NodeId p) {
                     return t.sum(t.add(p, other_vec(t)));
                   }});
  cases.push_back({"sub", {4}, -2, 2, [=](Tape& t, NodeId p) {
                     return t.sum(t.sub(other_vec(t), p));
                   }});
  cases.push_back({"mul", {4}, -2, 2, [=](Tape& t, NodeId p) {
                     return t.sum(t.mul(p, other_vec(t)));
                   }});
  cases.push_back({"matmul_lhs", {2, 3}, -2, 2, [](Tape& t, NodeId p) {
                     const NodeId b =
                         t.constant(Tensor::matrix(3, 2, {1, -1, .5, 2, 0, 1}));
                     return t.sum(t.matmul(p, b));
                   }});
  cases.push_back({"matmul_rhs", {3, 2}, -2, 2, [](Tape& t, NodeId p) {
                     const NodeId a =
                         t.constant(Tensor::matrix(2, 3, {1, 2, -1, .3, 0, 1}));
                     return t.sum(t.square(t.matmul(a, p)));
                   }});
  cases.push_back({"scale", {4}, -2, 2, [](Tape& t, NodeId p) {
                     return t.sum(t.scale(p, -1.3));
                   }});
  cases.push_back({"sum", {5}, -2, 2,
                   [](Tape& t, NodeId p) { return t.sum(p); }});
  cases.push_back({"mean", {5}, -2, 2, [](Tape& t, NodeId p) {
                     return t.square(t.mean(p));
                   }});
  cases.push_back({"concat", {3}, -2, 2, [=](Tape& t, NodeId p) {
                     const NodeId c = t.concat(p, t.constant(Tensor::vec({2})));
                     return t.sum(t.square(c));
                   }});
  cases.push_back({"slice", {6}, -2, 2, [](Tape& t, NodeId p) {
                     return t.sum(t.square(t.slice(p, 1, {2, 2})));
                   }});
  cases.push_back({"gather", {5}, -2, 2, [](Tape& t, NodeId p) {
                     return t.sum(t.square(t.gather(p, {4, 0, 2, 0}, {4})));
                   }});
  cases.push_back({"transpose", {2, 3}, -2, 2, [](Tape& t, NodeId p) {
                     return t.sum(t.square(t.transpose(p)));
                   }});
  cases.push_back({"add_rowvec_m", {2, 3}, -2, 2, [](Tape& t, NodeId p) {
                     const NodeId v = t.constant(Tensor::vec({1, -2, 0.5}));
                     return t.sum(t.square(t.add_rowvec(p, v)));
                   }});
  cases.push_back({"add_rowvec_v", {3}, -2, 2, [](Tape& t, NodeId p) {
                     const NodeId m = t.constant(
                         Tensor::matrix(2, 3, {1, 0, -1, .5, 2, 1}));
                     return t.sum(t.square(t.add_rowvec(m, p)));
                   }});
  cases.push_back({"softplus", {4}, -2, 2, [](Tape& t, NodeId p) {
                     return t.sum(t.softplus(p));
                   }});
  cases.push_back({"tanh", {4}, -2, 2, [](Tape& t, NodeId p) {
                     return t.sum(t.tanh(p));
                   }});
  cases.push_back({"cos", {4}, -2, 2, [](Tape& t, NodeId p) {
                     return t.sum(t.cos(p));
                   }});
  cases.push_back({"exp", {4}, -2, 2, [](Tape& t, NodeId p) {
                     return t.sum(t.exp(p));
                   }});
  cases.push_back({"log", {4}, 0.5, 2.5, [](Tape& t, NodeId p) {
                     return t.sum(t.log(p));
                   }});
  cases.push_back({"square", {4}, -2, 2, [](Tape& t, NodeId p) {
                     return t.sum(t.square(p));
                   }});
  cases.push_back({"label_logprob", {2, 3}, -2, 2, [](Tape& t, NodeId p) {
                     return t.label_logprob_sum(p, {1, 2});
                   }});
  return cases;
}

}  // namespace

TEST_CASE("every primitive matches central differences on random inputs") {
  std::mt19937_64 rng(123);
  for (const auto& pc : primitive_cases()) {
    CAPTURE(pc.name);
    // spread the 100 draws across the case list to keep runtime sane:
    // each primitive sees 100 random parameter tensors
    std::uniform_real_distribution<double> dist(pc.lo, pc.hi);
    for (int rep = 0; rep < 100; ++rep) {
      Tensor p = Tensor::zeros(pc.shape);
      for (double& v : p.data) v = dist(rng);
      const auto r = grad_check(pc.fn, p, 1e-5, 1e-4);
      if (!r.passed) CAPTURE(r.max_rel_err);
      REQUIRE(r.passed);
    }
  }
}

TEST_CASE("3-op chains match finite differences") {
  using Unary = NodeId (*)(Tape&, NodeId);
  static const Unary pool[] = {
      [](Tape& t, NodeId x) { return t.softplus(x); },
      [](Tape& t, NodeId x) { return t.tanh(x); },
      [](Tape& t, NodeId x) { return t.cos(x); },
      [](Tape& t, NodeId x) { return t.square(x); },
      [](Tape& t, NodeId x) { return t.scale(x, 0.7); },
      [](Tape& t, NodeId x) { return t.exp(t.scale(x, 0.3)); },
  };
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::uniform_int_distribution<std::size_t> zpick(0, std::size(pool) - 1);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t o1 = zpick(rng), o2 = zpick(rng), o3 = zpick(rng);
    Tensor p = Tensor::zeros({3});
    for (double& v : p.data) v = dist(rng);
    const auto r = grad_check(
        [&](Tape& t, NodeId x) {
          return t.sum(pool[o3](t, pool[o2](t, pool[o1](t, x))));
        },
        p, 1e-5, 1e-4);
    CAPTURE(o1);
    CAPTURE(o2);
    CAPTURE(o3);
    REQUIRE(r.passed);
  }
}

TEST_CASE("forward+backward reruns are bit-identical") {
  auto run = [](std::vector<double>& grad_out) {
    Tape tape;
    const NodeId p = tape.leaf(Tensor::vec({0.3, -1.2, 0.8}));
    const NodeId q = tape.softplus(tape.scale(p, 1.7));
    const NodeId r = tape.sum(tape.mul(q, tape.cos(p)));
    grad_out = tape.backward(r)[p.v].data;
    return tape.value(r).data[0];
  };
  std::vector<double> g1, g2;
  const double v1 = run(g1);
  const double v2 = run(g2);
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}

TEST_CASE("label_logprob_sum: uniform logits give ln(1/2)") {
  Tape tape;
  const NodeId logits = tape.leaf(Tensor::matrix(1, 2, {0.0, 0.0}));
  const NodeId ll = tape.label_logprob_sum(logits, {0});
  CHECK(tape.value(ll).data[0] ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));
}
