// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psdebnn/tensor.hpp"

namespace psdebnn {

struct ParamSlot {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
};

// Named trainable tensors with paired gradient slots and Adam state.
// Slot order is fixed at registration time and defines the serialization
// order in checkpoints.
class ParamStore {
 public:
  void add(std::string name, Tensor init);
  bool has(const std::string& name) const;
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);

  std::vector<ParamSlot>& slots() { return slots_; }
  const std::vector<ParamSlot>& slots() const { return slots_; }
  std::size_t total_size() const;

  void zero_grads();
  void accumulate_grad(const std::string& name, const Tensor& g);
  double grad_norm() const;
  // Scales gradients so the global norm is at most max_norm.
  void clip_grad_norm(double max_norm);

  // One Adam update on every slot, descending along the stored gradients.
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);
  std::int64_t adam_steps() const { return adam_steps_; }
  void set_adam_steps(std::int64_t n) { adam_steps_ = n; }

 private:
  ParamSlot& find(const std::string& name);
  std::vector<ParamSlot> slots_;
  std::int64_t adam_steps_ = 0;
};

}  // namespace psdebnn
