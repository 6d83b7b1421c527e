// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/params.hpp"

#include <cmath>

#include "psdebnn/errors.hpp"
#include "psdebnn/kernels.hpp"

namespace psdebnn {

void ParamStore::add(std::string name, Tensor init) {
  for (const auto& s : slots_)
    if (s.name == name) throw ConfigError("duplicate parameter '" + name + "'");
  ParamSlot slot;
  slot.name = std::move(name);
  slot.grad = Tensor::zeros(init.shape);
  slot.adam_m = Tensor::zeros(init.shape);
  slot.adam_v = Tensor::zeros(init.shape);
  slot.value = std::move(init);
  slots_.push_back(std::move(slot));
}

ParamSlot& ParamStore::find(const std::string& name) {
  for (auto& s : slots_)
    if (s.name == name) return s;
  throw ConfigError("unknown parameter '" + name + "'");
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& s : slots_)
    if (s.name == name) return true;
  return false;
}

Tensor& ParamStore::value(const std::string& name) { return find(name).value; }

const Tensor& ParamStore::value(const std::string& name) const {
  return const_cast<ParamStore*>(this)->find(name).value;
}

Tensor& ParamStore::grad(const std::string& name) { return find(name).grad; }

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.value.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& s : slots_)
    for (double& g : s.grad.data) g = 0.0;
}

void ParamStore::accumulate_grad(const std::string& name, const Tensor& g) {
  Tensor& dst = find(name).grad;
  if (!dst.same_shape(g))
    throw ShapeError("gradient shape mismatch for '" + name + "'");
  kernels::active().axpy(1.0, g.data.data(), dst.data.data(), g.numel());
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& s : slots_)
    sq += kernels::active().dot(s.grad.data.data(), s.grad.data.data(),
                                s.grad.numel());
  return std::sqrt(sq);
}

void ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm <= max_norm || norm == 0.0) return;
  const double f = max_norm / norm;
  for (auto& s : slots_)
    kernels::active().scale(s.grad.data.data(), f, s.grad.data.data(),
                            s.grad.numel());
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
  ++adam_steps_;
  const double t = static_cast<double>(adam_steps_);
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (auto& s : slots_) {
    for (std::size_t i = 0; i < s.value.numel(); ++i) {
      const double g = s.grad.data[i];
      s.adam_m.data[i] = beta1 * s.adam_m.data[i] + (1.0 - beta1) * g;
      s.adam_v.data[i] = beta2 * s.adam_v.data[i] + (1.0 - beta2) * g * g;
      const double mhat = s.adam_m.data[i] / bc1;
      const double vhat = s.adam_v.data[i] / bc2;
      s.value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace psdebnn
