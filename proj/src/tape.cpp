// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/tape.hpp"

#include <cmath>
#include <cstring>
#include <utility>

#include "psdebnn/errors.hpp"
#include "psdebnn/kernels.hpp"

namespace psdebnn {

namespace {

const kernels::Ops& K() { return kernels::active(); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace

NodeId Tape::push(Node n) {
  if (nodes_.size() >= UINT32_MAX - 1) throw ContractError("tape overflow");
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

NodeId Tape::constant(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.needs_grad = false;
  return push(std::move(n));
}

NodeId Tape::constant_scalar(double v) { return constant(Tensor::scalar(v)); }

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape(ta, tb, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = Tensor::zeros(ta.shape);
  K().add(ta.data.data(), tb.data.data(), n.value.data.data(), ta.numel());
  n.needs_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape(ta, tb, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.value = Tensor::zeros(ta.shape);
  K().sub(ta.data.data(), tb.data.data(), n.value.data.data(), ta.numel());
  n.needs_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape(ta, tb, "mul");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = Tensor::zeros(ta.shape);
  K().mul(ta.data.data(), tb.data.data(), n.value.data.data(), ta.numel());
  n.needs_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || (tb.rank() != 2 && tb.rank() != 1))
    throw ShapeError("matmul: expected (m,k)x(k,n) or (m,k)x(k), got " +
                     shape_str(ta.shape) + " x " + shape_str(tb.shape));
  const std::size_t m = ta.shape[0], k = ta.shape[1];
  const std::size_t kb = tb.shape[0];
  const std::size_t nn = tb.rank() == 2 ? tb.shape[1] : 1;
  if (k != kb)
    throw ShapeError("matmul: inner dimensions disagree, " +
                     shape_str(ta.shape) + " x " + shape_str(tb.shape));
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.value = tb.rank() == 2 ? Tensor::zeros({m, nn}) : Tensor::zeros({m});
  K().matmul(ta.data.data(), tb.data.data(), n.value.data.data(), m, k, nn);
  n.needs_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.c = c;
  n.value = Tensor::zeros(ta.shape);
  K().scale(ta.data.data(), c, n.value.data.data(), ta.numel());
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kSum;
  n.a = a;
  n.value = Tensor::scalar(K().sum(ta.data.data(), ta.numel()));
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
  const Tensor& ta = value(a);
  if (ta.numel() == 0) throw ContractError("mean of empty tensor");
  Node n;
  n.op = Op::kMean;
  n.a = a;
  n.value = Tensor::scalar(K().sum(ta.data.data(), ta.numel()) /
                           static_cast<double>(ta.numel()));
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::concat(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 1 || tb.rank() != 1)
    throw ShapeError("concat: rank-1 operands required, got " +
                     shape_str(ta.shape) + " and " + shape_str(tb.shape));
  Node n;
  n.op = Op::kConcat;
  n.a = a;
  n.b = b;
  n.value = Tensor::zeros({ta.numel() + tb.numel()});
  std::memcpy(n.value.data.data(), ta.data.data(),
              ta.numel() * sizeof(double));
  std::memcpy(n.value.data.data() + ta.numel(), tb.data.data(),
              tb.numel() * sizeof(double));
  n.needs_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

NodeId Tape::slice(NodeId a, std::size_t start,
                   std::vector<std::size_t> shape) {
  const Tensor& ta = value(a);
  const std::size_t len = shape_numel(shape);
  if (start + len > ta.numel())
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") exceeds " +
                     std::to_string(ta.numel()) + " elements");
  Node n;
  n.op = Op::kSlice;
  n.a = a;
  n.start = start;
  n.value = Tensor(std::move(shape),
                   std::vector<double>(ta.data.begin() + start,
                                       ta.data.begin() + start + len));
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::gather(NodeId a, std::vector<std::uint32_t> indices,
                    std::vector<std::size_t> shape) {
  const Tensor& ta = value(a);
  if (shape_numel(shape) != indices.size())
    throw ShapeError("gather: target shape does not match index count");
  std::vector<double> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= ta.numel())
      throw ShapeError("gather: index " + std::to_string(indices[i]) +
                       " out of range");
    out[i] = ta.data[indices[i]];
  }
  Node n;
  n.op = Op::kGather;
  n.a = a;
  n.idx = std::move(indices);
  n.value = Tensor(std::move(shape), std::move(out));
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::transpose(NodeId a) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) throw ShapeError("transpose: rank-2 operand required");
  const std::size_t r = ta.shape[0], c = ta.shape[1];
  Tensor out = Tensor::zeros({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data[j * r + i] = ta.data[i * c + j];
  Node n;
  n.op = Op::kTranspose;
  n.a = a;
  n.value = std::move(out);
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::add_rowvec(NodeId m, NodeId v) {
  const Tensor& tm = value(m);
  const Tensor& tv = value(v);
  if (tm.rank() != 2 || tv.rank() != 1 || tv.shape[0] != tm.shape[1])
    throw ShapeError("add_rowvec: expected (r,c)+(c,), got " +
                     shape_str(tm.shape) + " + " + shape_str(tv.shape));
  Node n;
  n.op = Op::kAddRowVec;
  n.a = m;
  n.b = v;
  n.value = tm;
  const std::size_t rows = tm.shape[0], cols = tm.shape[1];
  for (std::size_t i = 0; i < rows; ++i)
    K().add(tm.data.data() + i * cols, tv.data.data(),
            n.value.data.data() + i * cols, cols);
  n.needs_grad = requires_grad(m) || requires_grad(v);
  return push(std::move(n));
}

NodeId Tape::softplus(NodeId a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kSoftplus;
  n.a = a;
  n.value = Tensor::zeros(ta.shape);
  K().softplus(ta.data.data(), n.value.data.data(), ta.numel());
  // cache sigmoid(x) for backward
  n.aux = Tensor::zeros(ta.shape);
  K().sigmoid(ta.data.data(), n.aux.data.data(), ta.numel());
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::tanh(NodeId a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = Tensor::zeros(ta.shape);
  K().tanh(ta.data.data(), n.value.data.data(), ta.numel());
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::cos(NodeId a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kCos;
  n.a = a;
  n.value = Tensor::zeros(ta.shape);
  K().cos(ta.data.data(), n.value.data.data(), ta.numel());
  n.aux = Tensor::zeros(ta.shape);
  K().sin(ta.data.data(), n.aux.data.data(), ta.numel());
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::exp(NodeId a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kExp;
  n.a = a;
  n.value = Tensor::zeros(ta.shape);
  K().exp(ta.data.data(), n.value.data.data(), ta.numel());
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::log(NodeId a) {
  const Tensor& ta = value(a);
  for (double v : ta.data)
    if (v <= 0.0)
      throw DomainError("log: nonpositive input " + std::to_string(v));
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.value = Tensor::zeros(ta.shape);
  K().log(ta.data.data(), n.value.data.data(), ta.numel());
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::square(NodeId a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kSquare;
  n.a = a;
  n.value = Tensor::zeros(ta.shape);
  K().square(ta.data.data(), n.value.data.data(), ta.numel());
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

NodeId Tape::label_logprob_sum(NodeId logits, const std::vector<int>& labels) {
  const Tensor& tl = value(logits);
  if (tl.rank() != 2)
    throw ShapeError("label_logprob_sum: logits must be (B,C)");
  const std::size_t b = tl.shape[0], c = tl.shape[1];
  if (labels.size() != b)
    throw ShapeError("label_logprob_sum: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(b) + " rows");
  Node n;
  n.op = Op::kLabelLogProbSum;
  n.a = logits;
  n.aux = Tensor::zeros({b, c});  // softmax rows, reused in backward
  n.idx.resize(b);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw ContractError("label " + std::to_string(y) + " outside [0," +
                          std::to_string(c) + ")");
    n.idx[i] = static_cast<std::uint32_t>(y);
    const double* row = tl.data.data() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j)
      n.aux.data[i * c + j] = std::exp(row[j] - lse);
    total += row[y] - lse;
  }
  n.value = Tensor::scalar(total);
  n.needs_grad = requires_grad(logits);
  return push(std::move(n));
}

std::vector<Tensor> Tape::backward(NodeId loss) const {
  if (!loss.valid() || loss.v >= nodes_.size())
    throw ContractError("backward: invalid loss node");
  if (!node(loss).value.is_scalar())
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(node(loss).value.shape));

  std::vector<Tensor> grad(nodes_.size());
  std::vector<char> live(nodes_.size(), 0);
  auto ensure = [&](NodeId id) -> Tensor& {
    if (!live[id.v]) {
      grad[id.v] = Tensor::zeros(nodes_[id.v].value.shape);
      live[id.v] = 1;
    }
    return grad[id.v];
  };

  ensure(loss).data[0] = 1.0;

  const auto& ops = K();
  for (std::uint32_t i = loss.v + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!live[i] || !n.needs_grad || n.op == Op::kLeaf) continue;
    const Tensor& g = grad[i];
    switch (n.op) {
      case Op::kAdd: {
        if (requires_grad(n.a))
          ops.axpy(1.0, g.data.data(), ensure(n.a).data.data(), g.numel());
        if (requires_grad(n.b))
          ops.axpy(1.0, g.data.data(), ensure(n.b).data.data(), g.numel());
        break;
      }
      case Op::kSub: {
        if (requires_grad(n.a))
          ops.axpy(1.0, g.data.data(), ensure(n.a).data.data(), g.numel());
        if (requires_grad(n.b))
          ops.axpy(-1.0, g.data.data(), ensure(n.b).data.data(), g.numel());
        break;
      }
      case Op::kMul: {
        const Tensor& va = node(n.a).value;
        const Tensor& vb = node(n.b).value;
        if (requires_grad(n.a)) {
          Tensor& ga = ensure(n.a);
          for (std::size_t j = 0; j < g.numel(); ++j)
            ga.data[j] += g.data[j] * vb.data[j];
        }
        if (requires_grad(n.b)) {
          Tensor& gb = ensure(n.b);
          for (std::size_t j = 0; j < g.numel(); ++j)
            gb.data[j] += g.data[j] * va.data[j];
        }
        break;
      }
      case Op::kMatMul: {
        const Tensor& va = node(n.a).value;
        const Tensor& vb = node(n.b).value;
        const std::size_t m = va.shape[0], k = va.shape[1];
        const std::size_t nn = vb.rank() == 2 ? vb.shape[1] : 1;
        if (requires_grad(n.a)) {
          // gA = G * B^T  -> gA(i,p) += sum_j G(i,j) B(p,j)
          Tensor& ga = ensure(n.a);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t p = 0; p < k; ++p)
              ga.data[r * k + p] +=
                  ops.dot(g.data.data() + r * nn, vb.data.data() + p * nn, nn);
        }
        if (requires_grad(n.b)) {
          // gB = A^T * G -> gB(p,:) += sum_i A(i,p) G(i,:)
          Tensor& gb = ensure(n.b);
          for (std::size_t r = 0; r < m; ++r) {
            const double* grow = g.data.data() + r * nn;
            const double* arow = va.data.data() + r * k;
            for (std::size_t p = 0; p < k; ++p)
              ops.axpy(arow[p], grow, gb.data.data() + p * nn, nn);
          }
        }
        break;
      }
      case Op::kScale: {
        ops.axpy(n.c, g.data.data(), ensure(n.a).data.data(), g.numel());
        break;
      }
      case Op::kSum: {
        Tensor& ga = ensure(n.a);
        const double gv = g.data[0];
        for (double& x : ga.data) x += gv;
        break;
      }
      case Op::kMean: {
        Tensor& ga = ensure(n.a);
        const double gv = g.data[0] / static_cast<double>(ga.numel());
        for (double& x : ga.data) x += gv;
        break;
      }
      case Op::kConcat: {
        const std::size_t na = node(n.a).value.numel();
        if (requires_grad(n.a))
          ops.axpy(1.0, g.data.data(), ensure(n.a).data.data(), na);
        if (requires_grad(n.b))
          ops.axpy(1.0, g.data.data() + na, ensure(n.b).data.data(),
                   g.numel() - na);
        break;
      }
      case Op::kSlice: {
        Tensor& ga = ensure(n.a);
        ops.axpy(1.0, g.data.data(), ga.data.data() + n.start, g.numel());
        break;
      }
      case Op::kGather: {
        Tensor& ga = ensure(n.a);
        for (std::size_t j = 0; j < n.idx.size(); ++j)
          ga.data[n.idx[j]] += g.data[j];
        break;
      }
      case Op::kTranspose: {
        Tensor& ga = ensure(n.a);
        const std::size_t r = n.value.shape[0], c = n.value.shape[1];
        for (std::size_t ii = 0; ii < r; ++ii)
          for (std::size_t jj = 0; jj < c; ++jj)
            ga.data[jj * r + ii] += g.data[ii * c + jj];
        break;
      }
      case Op::kAddRowVec: {
        const std::size_t rows = n.value.shape[0], cols = n.value.shape[1];
        if (requires_grad(n.a))
          ops.axpy(1.0, g.data.data(), ensure(n.a).data.data(), g.numel());
        if (requires_grad(n.b)) {
          Tensor& gv = ensure(n.b);
          for (std::size_t r = 0; r < rows; ++r)
            ops.axpy(1.0, g.data.data() + r * cols, gv.data.data(), cols);
        }
        break;
      }
      case Op::kSoftplus: {
        Tensor& ga = ensure(n.a);
        for (std::size_t j = 0; j < g.numel(); ++j)
          ga.data[j] += g.data[j] * n.aux.data[j];
        break;
      }
      case Op::kTanh: {
        Tensor& ga = ensure(n.a);
        for (std::size_t j = 0; j < g.numel(); ++j)
          ga.data[j] += g.data[j] * (1.0 - n.value.data[j] * n.value.data[j]);
        break;
      }
      case Op::kCos: {
        Tensor& ga = ensure(n.a);
        for (std::size_t j = 0; j < g.numel(); ++j)
          ga.data[j] -= g.data[j] * n.aux.data[j];
        break;
      }
      case Op::kExp: {
        Tensor& ga = ensure(n.a);
        for (std::size_t j = 0; j < g.numel(); ++j)
          ga.data[j] += g.data[j] * n.value.data[j];
        break;
      }
      case Op::kLog: {
        Tensor& ga = ensure(n.a);
        const Tensor& va = node(n.a).value;
        for (std::size_t j = 0; j < g.numel(); ++j)
          ga.data[j] += g.data[j] / va.data[j];
        break;
      }
      case Op::kSquare: {
        Tensor& ga = ensure(n.a);
        const Tensor& va = node(n.a).value;
        for (std::size_t j = 0; j < g.numel(); ++j)
          ga.data[j] += 2.0 * g.data[j] * va.data[j];
        break;
      }
      case Op::kLabelLogProbSum: {
        Tensor& ga = ensure(n.a);
        const double gv = g.data[0];
        const std::size_t b = n.aux.shape[0], c = n.aux.shape[1];
        for (std::size_t r = 0; r < b; ++r) {
          for (std::size_t j = 0; j < c; ++j)
            ga.data[r * c + j] -= gv * n.aux.data[r * c + j];
          ga.data[r * c + n.idx[r]] += gv;
        }
        break;
      }
      case Op::kLeaf:
        break;
    }
  }
  // every differentiable leaf gets a gradient, zero when unreached
  for (std::uint32_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].op == Op::kLeaf && nodes_[i].needs_grad && !live[i])
      grad[i] = Tensor::zeros(nodes_[i].value.shape);
  return grad;
}

}  // namespace psdebnn
