#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fsner/tensor.hpp"

namespace fsner {

// A named trainable tensor. Lives in the model, outside any tape; each
// forward pass binds it to a leaf node via Tape::use so every use within one
// pass shares a node and gradients accumulate in one place.
struct Parameter {
  std::string name;
  Tensor value;
};

using NodeId = int;

// Reverse-mode differentiable computation tape over Tensors.
//
// Nodes are appended in topological order; backward() walks them in reverse.
// Elementwise binary ops require equal shapes or one scalar operand (no
// other broadcasting). matmul accepts [m x k]*[k x n] and [k]*[k x n].
// One tape serves one forward/backward pass and is then discarded.
class Tape {
 public:
  Tape() { nodes_.reserve(1024); }

  NodeId leaf(Tensor value, bool requires_grad = false);
  NodeId use(Parameter& p);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId relu(NodeId a);
  NodeId elu(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId neg(NodeId a);
  NodeId add_const(NodeId a, double c);
  NodeId mul_const(NodeId a, double c);
  NodeId sum(NodeId a);        // all elements -> scalar
  NodeId logsumexp(NodeId a);  // overflow-safe, all elements -> scalar
  NodeId concat(const std::vector<NodeId>& parts);  // flatten row-major

  // Populates gradients of all trainable leaves reachable from loss.
  // loss must be scalar.
  void backward(NodeId loss);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  // Gradient of the last backward() w.r.t. this node; zeros if untouched.
  Tensor grad(NodeId id) const;
  // Zeros if the parameter was never used on this tape.
  Tensor grad_of(const Parameter& p) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kMatmul,
    kRelu,
    kElu,
    kExp,
    kLog,
    kSqrt,
    kNeg,
    kAddConst,
    kMulConst,
    kSum,
    kLogSumExp,
    kConcat,
  };

  struct Node {
    Op op = Op::kLeaf;
    NodeId a = -1;
    NodeId b = -1;
    std::vector<NodeId> parts;  // kConcat only
    double c = 0.0;             // kAddConst / kMulConst operand
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    bool requires_grad = false;
  };

  NodeId push(Node n);
  NodeId binary(Op op, NodeId a, NodeId b);
  NodeId unary(Op op, NodeId a);
  Tensor& grad_ref(NodeId id);
  void accumulate(NodeId id, const Tensor& g);
  void accumulate_scaled(NodeId id, const Tensor& g, double scale);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
};

}  // namespace fsner
