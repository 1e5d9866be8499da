#include "fsner/graph.hpp"

#include <algorithm>
#include <cmath>

#include "fsner/error.hpp"

namespace fsner {

namespace {

bool scalar_like(const Tensor& t) { return t.size() == 1 && t.rank() <= 1; }

void check_elementwise(const char* op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b) || scalar_like(a) || scalar_like(b)) return;
  throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                       shape_str(b) + " do not conform");
}

}  // namespace

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

NodeId Tape::use(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return it->second;
  NodeId id = leaf(p.value, /*requires_grad=*/true);
  param_nodes_.emplace(&p, id);
  return id;
}

NodeId Tape::binary(Op op, NodeId a, NodeId b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;

  const char* name = op == Op::kAdd   ? "add"
                     : op == Op::kSub ? "sub"
                     : op == Op::kMul ? "mul"
                                      : "div";
  check_elementwise(name, va, vb);
  const Tensor& big = scalar_like(va) && !scalar_like(vb) ? vb : va;
  Tensor out(big.shape());
  std::size_t sz = big.size();
  for (std::size_t i = 0; i < sz; ++i) {
    double x = va[scalar_like(va) ? 0 : i];
    double y = vb[scalar_like(vb) ? 0 : i];
    switch (op) {
      case Op::kAdd: out[i] = x + y; break;
      case Op::kSub: out[i] = x - y; break;
      case Op::kMul: out[i] = x * y; break;
      default: out[i] = x / y; break;
    }
  }
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) { return binary(Op::kAdd, a, b); }
NodeId Tape::sub(NodeId a, NodeId b) { return binary(Op::kSub, a, b); }
NodeId Tape::mul(NodeId a, NodeId b) { return binary(Op::kMul, a, b); }
NodeId Tape::div(NodeId a, NodeId b) { return binary(Op::kDiv, a, b); }

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  if (vb.rank() != 2 || (va.rank() != 1 && va.rank() != 2) ||
      va.shape().back() != vb.shape()[0]) {
    throw DimensionError("matmul: shapes " + shape_str(va) + " and " +
                         shape_str(vb) + " do not conform");
  }
  std::size_t k = vb.shape()[0];
  std::size_t ncols = vb.shape()[1];
  Node n;
  n.op = Op::kMatmul;
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  if (va.rank() == 1) {
    Tensor out({ncols});
    for (std::size_t i = 0; i < k; ++i) {
      double x = va[i];
      if (x == 0.0) continue;
      const double* brow = vb.data() + i * ncols;
      for (std::size_t j = 0; j < ncols; ++j) out[j] += x * brow[j];
    }
    n.value = std::move(out);
  } else {
    std::size_t m = va.shape()[0];
    Tensor out({m, ncols});
    for (std::size_t r = 0; r < m; ++r) {
      const double* arow = va.data() + r * k;
      double* orow = out.data() + r * ncols;
      for (std::size_t i = 0; i < k; ++i) {
        double x = arow[i];
        if (x == 0.0) continue;
        const double* brow = vb.data() + i * ncols;
        for (std::size_t j = 0; j < ncols; ++j) orow[j] += x * brow[j];
      }
    }
    n.value = std::move(out);
  }
  return push(std::move(n));
}

NodeId Tape::unary(Op op, NodeId a) {
  const Tensor& va = nodes_[a].value;
  Node n;
  n.op = op;
  n.a = a;
  n.requires_grad = nodes_[a].requires_grad;
  Tensor out(va.shape());
  for (std::size_t i = 0; i < va.size(); ++i) {
    double x = va[i];
    switch (op) {
      case Op::kRelu: out[i] = x > 0.0 ? x : 0.0; break;
      case Op::kElu: out[i] = x > 0.0 ? x : std::expm1(x); break;
      case Op::kExp: out[i] = std::exp(x); break;
      case Op::kLog: out[i] = std::log(x); break;
      case Op::kSqrt: out[i] = std::sqrt(x); break;
      default: out[i] = -x; break;
    }
  }
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::relu(NodeId a) { return unary(Op::kRelu, a); }
NodeId Tape::elu(NodeId a) { return unary(Op::kElu, a); }
NodeId Tape::exp(NodeId a) { return unary(Op::kExp, a); }
NodeId Tape::log(NodeId a) { return unary(Op::kLog, a); }
NodeId Tape::sqrt(NodeId a) { return unary(Op::kSqrt, a); }
NodeId Tape::neg(NodeId a) { return unary(Op::kNeg, a); }

NodeId Tape::add_const(NodeId a, double c) {
  Node n;
  n.op = Op::kAddConst;
  n.a = a;
  n.c = c;
  n.requires_grad = nodes_[a].requires_grad;
  Tensor out = nodes_[a].value;
  for (double& x : out.values()) x += c;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::mul_const(NodeId a, double c) {
  Node n;
  n.op = Op::kMulConst;
  n.a = a;
  n.c = c;
  n.requires_grad = nodes_[a].requires_grad;
  Tensor out = nodes_[a].value;
  for (double& x : out.values()) x *= c;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  Node n;
  n.op = Op::kSum;
  n.a = a;
  n.requires_grad = nodes_[a].requires_grad;
  double s = 0.0;
  for (double x : nodes_[a].value.values()) s += x;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

NodeId Tape::logsumexp(NodeId a) {
  const Tensor& va = nodes_[a].value;
  if (va.size() == 0) {
    throw DimensionError("logsumexp: empty input");
  }
  Node n;
  n.op = Op::kLogSumExp;
  n.a = a;
  n.requires_grad = nodes_[a].requires_grad;
  double m = *std::max_element(va.values().begin(), va.values().end());
  double s = 0.0;
  for (double x : va.values()) s += std::exp(x - m);
  n.value = Tensor::scalar(m + std::log(s));
  return push(std::move(n));
}

NodeId Tape::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  Node n;
  n.op = Op::kConcat;
  n.parts = parts;
  std::size_t total = 0;
  for (NodeId p : parts) {
    total += nodes_[p].value.size();
    n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  }
  Tensor out({total});
  std::size_t off = 0;
  for (NodeId p : parts) {
    const Tensor& v = nodes_[p].value;
    std::copy(v.values().begin(), v.values().end(), out.data() + off);
    off += v.size();
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Tensor& Tape::grad_ref(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) {
    n.grad = Tensor(n.value.shape());
  }
  return n.grad;
}

void Tape::accumulate(NodeId id, const Tensor& g) {
  Tensor& dst = grad_ref(id);
  if (dst.size() == 1 && g.size() > 1) {
    // Broadcast scalar operand: gradient is the sum of incoming entries.
    double s = 0.0;
    for (double x : g.values()) s += x;
    dst[0] += s;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

void Tape::accumulate_scaled(NodeId id, const Tensor& g, double scale) {
  Tensor& dst = grad_ref(id);
  if (dst.size() == 1 && g.size() > 1) {
    double s = 0.0;
    for (double x : g.values()) s += x;
    dst[0] += scale * s;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
}

void Tape::backward(NodeId loss) {
  Node& top = nodes_[loss];
  if (top.value.size() != 1) {
    throw DimensionError("backward: loss must be scalar, got " +
                         shape_str(top.value));
  }
  grad_ref(loss)[0] = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kAdd: {
        if (nodes_[n.a].requires_grad) accumulate(n.a, g);
        if (nodes_[n.b].requires_grad) accumulate(n.b, g);
        break;
      }
      case Op::kSub: {
        if (nodes_[n.a].requires_grad) accumulate(n.a, g);
        if (nodes_[n.b].requires_grad) accumulate_scaled(n.b, g, -1.0);
        break;
      }
      case Op::kMul: {
        const Tensor& va = nodes_[n.a].value;
        const Tensor& vb = nodes_[n.b].value;
        if (nodes_[n.a].requires_grad) {
          Tensor ga(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] = g[i] * vb[vb.size() == 1 ? 0 : i];
          accumulate(n.a, ga);
        }
        if (nodes_[n.b].requires_grad) {
          Tensor gb(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            gb[i] = g[i] * va[va.size() == 1 ? 0 : i];
          accumulate(n.b, gb);
        }
        break;
      }
      case Op::kDiv: {
        const Tensor& va = nodes_[n.a].value;
        const Tensor& vb = nodes_[n.b].value;
        if (nodes_[n.a].requires_grad) {
          Tensor ga(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] = g[i] / vb[vb.size() == 1 ? 0 : i];
          accumulate(n.a, ga);
        }
        if (nodes_[n.b].requires_grad) {
          Tensor gb(g.shape());
          for (std::size_t i = 0; i < g.size(); ++i) {
            double y = vb[vb.size() == 1 ? 0 : i];
            gb[i] = -g[i] * va[va.size() == 1 ? 0 : i] / (y * y);
          }
          accumulate(n.b, gb);
        }
        break;
      }
      case Op::kMatmul: {
        const Tensor& va = nodes_[n.a].value;
        const Tensor& vb = nodes_[n.b].value;
        std::size_t k = vb.shape()[0];
        std::size_t ncols = vb.shape()[1];
        if (va.rank() == 1) {
          // out[j] = sum_i a[i] b[i][j]
          if (nodes_[n.a].requires_grad) {
            Tensor ga({k});
            for (std::size_t i = 0; i < k; ++i) {
              const double* brow = vb.data() + i * ncols;
              double s = 0.0;
              for (std::size_t j = 0; j < ncols; ++j) s += g[j] * brow[j];
              ga[i] = s;
            }
            accumulate(n.a, ga);
          }
          if (nodes_[n.b].requires_grad) {
            Tensor& gb = grad_ref(n.b);
            for (std::size_t i = 0; i < k; ++i) {
              double x = va[i];
              if (x == 0.0) continue;
              double* grow = gb.data() + i * ncols;
              for (std::size_t j = 0; j < ncols; ++j) grow[j] += x * g[j];
            }
          }
        } else {
          std::size_t m = va.shape()[0];
          if (nodes_[n.a].requires_grad) {
            Tensor ga({m, k});
            for (std::size_t r = 0; r < m; ++r) {
              const double* grow = g.data() + r * ncols;
              double* garow = ga.data() + r * k;
              for (std::size_t i = 0; i < k; ++i) {
                const double* brow = vb.data() + i * ncols;
                double s = 0.0;
                for (std::size_t j = 0; j < ncols; ++j) s += grow[j] * brow[j];
                garow[i] = s;
              }
            }
            accumulate(n.a, ga);
          }
          if (nodes_[n.b].requires_grad) {
            Tensor& gb = grad_ref(n.b);
            for (std::size_t r = 0; r < m; ++r) {
              const double* arow = va.data() + r * k;
              const double* grow = g.data() + r * ncols;
              for (std::size_t i = 0; i < k; ++i) {
                double x = arow[i];
                if (x == 0.0) continue;
                double* gbrow = gb.data() + i * ncols;
                for (std::size_t j = 0; j < ncols; ++j)
                  gbrow[j] += x * grow[j];
              }
            }
          }
        }
        break;
      }
      case Op::kRelu: {
        const Tensor& va = nodes_[n.a].value;
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] = va[i] > 0.0 ? g[i] : 0.0;
        accumulate(n.a, ga);
        break;
      }
      case Op::kElu: {
        const Tensor& va = nodes_[n.a].value;
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] = va[i] > 0.0 ? g[i] : g[i] * (n.value[i] + 1.0);
        accumulate(n.a, ga);
        break;
      }
      case Op::kExp: {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * n.value[i];
        accumulate(n.a, ga);
        break;
      }
      case Op::kLog: {
        const Tensor& va = nodes_[n.a].value;
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] / va[i];
        accumulate(n.a, ga);
        break;
      }
      case Op::kSqrt: {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] = g[i] * 0.5 / n.value[i];
        accumulate(n.a, ga);
        break;
      }
      case Op::kNeg: {
        accumulate_scaled(n.a, g, -1.0);
        break;
      }
      case Op::kAddConst: {
        accumulate(n.a, g);
        break;
      }
      case Op::kMulConst: {
        accumulate_scaled(n.a, g, n.c);
        break;
      }
      case Op::kSum: {
        Tensor& ga = grad_ref(n.a);
        double gv = g[0];
        for (double& x : ga.values()) x += gv;
        break;
      }
      case Op::kLogSumExp: {
        const Tensor& va = nodes_[n.a].value;
        double out = n.value[0];
        double gv = g[0];
        Tensor& ga = grad_ref(n.a);
        for (std::size_t i = 0; i < va.size(); ++i)
          ga[i] += gv * std::exp(va[i] - out);
        break;
      }
      case Op::kConcat: {
        std::size_t off = 0;
        for (NodeId p : n.parts) {
          std::size_t sz = nodes_[p].value.size();
          if (nodes_[p].requires_grad) {
            Tensor& gp = grad_ref(p);
            for (std::size_t i = 0; i < sz; ++i) gp[i] += g[off + i];
          }
          off += sz;
        }
        break;
      }
    }
  }
}

Tensor Tape::grad(NodeId id) const {
  const Node& n = nodes_[id];
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

Tensor Tape::grad_of(const Parameter& p) const {
  auto it = param_nodes_.find(&p);
  if (it == param_nodes_.end()) return Tensor(p.value.shape());
  return grad(it->second);
}

}  // namespace fsner
