// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff over a single-threaded operation tape. Nodes are
// appended in topological order (inputs always precede their consumers);
// backward() walks the record in exact reverse order. All shapes are
// explicit — there is no broadcasting.
#pragma once

#include <cstdint>
#include <vector>

#include "psdebnn/tensor.hpp"

namespace psdebnn {

struct NodeId {
  std::uint32_t v = UINT32_MAX;
  bool valid() const { return v != UINT32_MAX; }
  friend bool operator==(NodeId a, NodeId b) { return a.v == b.v; }
};

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,       // elementwise
  kMatMul,    // (m,k)x(k,n) or (m,k)x(k)
  kScale,     // constant multiple
  kSum,
  kMean,
  kConcat,    // rank-1
  kSlice,     // contiguous flat range viewed under a target shape
  kGather,    // arbitrary flat indices viewed under a target shape
  kTranspose, // rank-2
  kAddRowVec, // (r,c) + (c,) added to every row
  kSoftplus,
  kTanh,
  kCos,
  kExp,
  kLog,
  kSquare,
  kLabelLogProbSum,  // fused softmax/logsumexp/cross-entropy head
};

class Tape {
 public:
  // Differentiable leaf (trainable parameter or integration state root).
  NodeId leaf(Tensor value);
  // Non-differentiable leaf (data, noise draws, time constants).
  NodeId constant(Tensor value);
  NodeId constant_scalar(double v);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId concat(NodeId a, NodeId b);
  NodeId slice(NodeId a, std::size_t start, std::vector<std::size_t> shape);
  NodeId gather(NodeId a, std::vector<std::uint32_t> indices,
                std::vector<std::size_t> shape);
  NodeId transpose(NodeId a);
  NodeId add_rowvec(NodeId m, NodeId v);
  NodeId softplus(NodeId a);
  NodeId tanh(NodeId a);
  NodeId cos(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId square(NodeId a);
  // Sum over rows b of log softmax(logits[b,:])[labels[b]]. logits (B,C).
  NodeId label_logprob_sum(NodeId logits, const std::vector<int>& labels);

  const Tensor& value(NodeId id) const { return nodes_[id.v].value; }
  std::size_t size() const { return nodes_.size(); }
  bool requires_grad(NodeId id) const { return nodes_[id.v].needs_grad; }

  // Adjoints of every node reachable from `loss` (scalar), indexed by
  // node id; unreachable or non-differentiable nodes get an empty tensor.
  // d(loss)/d(loss) = 1.
  std::vector<Tensor> backward(NodeId loss) const;

 private:
  struct Node {
    Op op;
    NodeId a, b;
    Tensor value;
    Tensor aux;    // cached op-specific data (activation derivative inputs,
                   // softmax rows, ...) reused by backward
    double c = 0.0;
    std::size_t start = 0;
    std::vector<std::uint32_t> idx;  // gather indices or labels
    bool needs_grad = false;
  };

  NodeId push(Node n);
  const Node& node(NodeId id) const { return nodes_[id.v]; }

  std::vector<Node> nodes_;
};

}  // namespace psdebnn
