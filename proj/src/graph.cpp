#include "cafv/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "cafv/errors.hpp"

namespace cafv {
namespace {

std::string node_label(const Value& v) {
  return std::string(op_name(v.op)) + " node #" + std::to_string(v.id);
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Constant: return "constant";
    case OpKind::Input: return "input";
    case OpKind::Param: return "param";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::MaskMul: return "mask_mul";
    case OpKind::Concat: return "concat";
    case OpKind::Relu: return "relu";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::SoftmaxXent: return "softmax_xent";
    case OpKind::RowL2Norm: return "row_l2_norm";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
    case OpKind::ScalarAffine: return "scalar_affine";
    case OpKind::Reshape: return "reshape";
  }
  return "?";
}

Graph::Graph(const ParamStore* store) : store_(store) {
  if (store_ == nullptr) throw ValidationError("Graph needs a parameter store");
}

NodeId Graph::push(Value v) {
  v.id = NodeId(nodes_.size());
  nodes_.push_back(std::move(v));
  return nodes_.back().id;
}

const Value& Graph::checked(NodeId id, const char* what) const {
  if (id >= nodes_.size()) {
    throw ValidationError(std::string(what) + ": node #" + std::to_string(id) +
                          " does not exist");
  }
  return nodes_[id];
}

NodeId Graph::constant(Tensor value) {
  Value v;
  v.op = OpKind::Constant;
  v.shape = value.shape;
  v.fixed = std::move(value);
  return push(std::move(v));
}

NodeId Graph::input(const std::string& name, std::vector<std::size_t> shape) {
  Value v;
  v.op = OpKind::Input;
  v.name = name;
  v.shape = std::move(shape);
  return push(std::move(v));
}

NodeId Graph::param(const std::string& name) {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return it->second;
  Value v;
  v.op = OpKind::Param;
  v.name = name;
  v.shape = store_->value(name).shape;  // throws if unknown
  const NodeId id = push(std::move(v));
  param_nodes_.emplace(name, id);
  return id;
}

NodeId Graph::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
  const Value& va = checked(a, "matmul lhs");
  const Value& vb = checked(b, "matmul rhs");
  if (va.shape.size() != 2 || vb.shape.size() != 2) {
    throw ShapeError("matmul node #" + std::to_string(nodes_.size()) +
                     ": rank-2 operands required, got " + shape_to_string(va.shape) +
                     " and " + shape_to_string(vb.shape));
  }
  const std::size_t m = trans_a ? va.shape[1] : va.shape[0];
  const std::size_t k = trans_a ? va.shape[0] : va.shape[1];
  const std::size_t kb = trans_b ? vb.shape[1] : vb.shape[0];
  const std::size_t n = trans_b ? vb.shape[0] : vb.shape[1];
  if (k != kb) {
    throw ShapeError("matmul node #" + std::to_string(nodes_.size()) +
                     ": inner dimensions differ, " + shape_to_string(va.shape) +
                     (trans_a ? "^T" : "") + " x " + shape_to_string(vb.shape) +
                     (trans_b ? "^T" : ""));
  }
  Value v;
  v.op = OpKind::MatMul;
  v.parents = {a, b};
  v.shape = {m, n};
  v.trans_a = trans_a;
  v.trans_b = trans_b;
  return push(std::move(v));
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Value& va = checked(a, "add lhs");
  const Value& vb = checked(b, "add rhs");
  const bool same = va.shape == vb.shape;
  const bool row_broadcast =
      va.shape.size() == 2 &&
      ((vb.shape.size() == 1 && vb.shape[0] == va.shape[1]) ||
       (vb.shape.size() == 2 && vb.shape[0] == 1 && vb.shape[1] == va.shape[1]));
  if (!same && !row_broadcast) {
    throw ShapeError("add node #" + std::to_string(nodes_.size()) + ": cannot add " +
                     shape_to_string(vb.shape) + " to " + shape_to_string(va.shape));
  }
  Value v;
  v.op = OpKind::Add;
  v.parents = {a, b};
  v.shape = va.shape;
  return push(std::move(v));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Value& va = checked(a, "sub lhs");
  const Value& vb = checked(b, "sub rhs");
  if (va.shape != vb.shape) {
    throw ShapeError("sub node #" + std::to_string(nodes_.size()) + ": shape mismatch " +
                     shape_to_string(va.shape) + " vs " + shape_to_string(vb.shape));
  }
  Value v;
  v.op = OpKind::Sub;
  v.parents = {a, b};
  v.shape = va.shape;
  return push(std::move(v));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Value& va = checked(a, "mul lhs");
  const Value& vb = checked(b, "mul rhs");
  const bool same = va.shape == vb.shape;
  const bool a_scalar = shape_numel(va.shape) == 1;
  const bool b_scalar = shape_numel(vb.shape) == 1;
  if (!same && !a_scalar && !b_scalar) {
    throw ShapeError("mul node #" + std::to_string(nodes_.size()) + ": shape mismatch " +
                     shape_to_string(va.shape) + " vs " + shape_to_string(vb.shape));
  }
  Value v;
  v.op = OpKind::Mul;
  v.parents = {a, b};
  v.shape = a_scalar && !same ? vb.shape : va.shape;
  return push(std::move(v));
}

NodeId Graph::mask_mul(NodeId a, Tensor mask) {
  const Value& va = checked(a, "mask_mul");
  if (va.shape != mask.shape) {
    throw ShapeError("mask_mul node #" + std::to_string(nodes_.size()) +
                     ": mask shape " + mask.shape_str() + " differs from input " +
                     shape_to_string(va.shape));
  }
  Value v;
  v.op = OpKind::MaskMul;
  v.parents = {a};
  v.shape = va.shape;
  v.fixed = std::move(mask);
  return push(std::move(v));
}

NodeId Graph::concat(NodeId a, NodeId b) {
  const Value& va = checked(a, "concat lhs");
  const Value& vb = checked(b, "concat rhs");
  if (va.shape.size() != vb.shape.size() || va.shape.empty() || va.shape.size() > 2 ||
      (va.shape.size() == 2 && va.shape[0] != vb.shape[0])) {
    throw ShapeError("concat node #" + std::to_string(nodes_.size()) +
                     ": incompatible shapes " + shape_to_string(va.shape) + " and " +
                     shape_to_string(vb.shape));
  }
  Value v;
  v.op = OpKind::Concat;
  v.parents = {a, b};
  if (va.shape.size() == 1) {
    v.shape = {va.shape[0] + vb.shape[0]};
  } else {
    v.shape = {va.shape[0], va.shape[1] + vb.shape[1]};
  }
  return push(std::move(v));
}

NodeId Graph::relu(NodeId a) {
  const Value& va = checked(a, "relu");
  Value v;
  v.op = OpKind::Relu;
  v.parents = {a};
  v.shape = va.shape;
  return push(std::move(v));
}

NodeId Graph::leaky_relu(NodeId a, double slope) {
  const Value& va = checked(a, "leaky_relu");
  Value v;
  v.op = OpKind::LeakyRelu;
  v.parents = {a};
  v.shape = va.shape;
  v.slope = slope;
  return push(std::move(v));
}

NodeId Graph::softmax_xent(NodeId logits, std::vector<std::size_t> targets) {
  const Value& vl = checked(logits, "softmax_xent");
  if (vl.shape.size() != 2) {
    throw ShapeError("softmax_xent node #" + std::to_string(nodes_.size()) +
                     ": logits must be rank-2, got " + shape_to_string(vl.shape));
  }
  if (targets.size() != vl.shape[0]) {
    throw ShapeError("softmax_xent node #" + std::to_string(nodes_.size()) + ": " +
                     std::to_string(targets.size()) + " targets for " +
                     std::to_string(vl.shape[0]) + " rows");
  }
  for (std::size_t t : targets) {
    if (t >= vl.shape[1]) {
      throw ValidationError("softmax_xent node #" + std::to_string(nodes_.size()) +
                            ": target index " + std::to_string(t) + " out of range for " +
                            std::to_string(vl.shape[1]) + " classes");
    }
  }
  Value v;
  v.op = OpKind::SoftmaxXent;
  v.parents = {logits};
  v.shape = {vl.shape[0]};
  v.targets = std::move(targets);
  return push(std::move(v));
}

NodeId Graph::row_l2_norm(NodeId a) {
  const Value& va = checked(a, "row_l2_norm");
  if (va.shape.size() != 2) {
    throw ShapeError("row_l2_norm node #" + std::to_string(nodes_.size()) +
                     ": rank-2 input required, got " + shape_to_string(va.shape));
  }
  Value v;
  v.op = OpKind::RowL2Norm;
  v.parents = {a};
  v.shape = {va.shape[0]};
  return push(std::move(v));
}

NodeId Graph::mean(NodeId a) {
  const Value& va = checked(a, "mean");
  if (shape_numel(va.shape) == 0) {
    throw ShapeError("mean node #" + std::to_string(nodes_.size()) + ": empty input");
  }
  Value v;
  v.op = OpKind::Mean;
  v.parents = {a};
  v.shape = {1};
  return push(std::move(v));
}

NodeId Graph::sum(NodeId a) {
  checked(a, "sum");
  Value v;
  v.op = OpKind::Sum;
  v.parents = {a};
  v.shape = {1};
  return push(std::move(v));
}

NodeId Graph::scalar_affine(NodeId a, double factor, double offset) {
  const Value& va = checked(a, "scalar_affine");
  Value v;
  v.op = OpKind::ScalarAffine;
  v.parents = {a};
  v.shape = va.shape;
  v.factor = factor;
  v.offset = offset;
  return push(std::move(v));
}

NodeId Graph::reshape(NodeId a, std::vector<std::size_t> shape) {
  const Value& va = checked(a, "reshape");
  if (shape_numel(shape) != shape_numel(va.shape)) {
    throw ShapeError("reshape node #" + std::to_string(nodes_.size()) + ": cannot view " +
                     shape_to_string(va.shape) + " as " + shape_to_string(shape));
  }
  Value v;
  v.op = OpKind::Reshape;
  v.parents = {a};
  v.shape = std::move(shape);
  return push(std::move(v));
}

std::vector<NodeId> Graph::ancestors(NodeId root) const {
  checked(root, "ancestors");
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<NodeId> stack = {root};
  seen[root] = true;
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    for (NodeId p : nodes_[id].parents) {
      if (!seen[p]) {
        seen[p] = true;
        stack.push_back(p);
      }
    }
  }
  std::vector<NodeId> out;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (seen[id]) out.push_back(id);
  }
  return out;  // ascending ids: parents precede children by construction
}

const Value& Graph::node(NodeId id) const { return checked(id, "node"); }

const Tensor& Graph::payload(NodeId id) const {
  const Value& v = checked(id, "payload");
  if (!v.has_payload) {
    throw ValidationError("payload of " + node_label(v) + " requested before forward");
  }
  return v.payload;
}

void Graph::reset() {
  for (Value& v : nodes_) {
    v.has_payload = false;
    v.has_grad = false;
  }
  forward_valid_ = false;
}

Tensor Graph::forward(NodeId root) { return forward(root, Bindings{}); }

Tensor Graph::forward(NodeId root, const Bindings& bindings) {
  return forward(root, bindings, ancestors(root));
}

Tensor Graph::forward(NodeId root, const Bindings& bindings,
                      const std::vector<NodeId>& order) {
  const std::vector<NodeId> anc = ancestors(root);
  if (order.size() != anc.size()) {
    throw ValidationError("forward order has " + std::to_string(order.size()) +
                          " nodes, expected " + std::to_string(anc.size()));
  }
  std::vector<bool> expected(nodes_.size(), false);
  for (NodeId id : anc) expected[id] = true;
  std::vector<bool> done(nodes_.size(), false);
  for (NodeId id : order) {
    if (id >= nodes_.size() || !expected[id] || done[id]) {
      throw ValidationError("forward order is not a permutation of the ancestors of node #" +
                            std::to_string(root));
    }
    for (NodeId p : nodes_[id].parents) {
      if (!done[p]) {
        throw ValidationError("forward order visits node #" + std::to_string(id) +
                              " before its parent #" + std::to_string(p));
      }
    }
    done[id] = true;
  }

  for (NodeId id : order) eval_node(nodes_[id], bindings);
  last_root_ = root;
  forward_valid_ = true;
  return nodes_[root].payload;
}

void Graph::eval_node(Value& v, const Bindings& bindings) {
  switch (v.op) {
    case OpKind::Constant:
      v.payload = v.fixed;
      break;
    case OpKind::Input: {
      auto it = bindings.find(v.name);
      if (it == bindings.end()) {
        throw ValidationError("unbound input '" + v.name + "' (" + node_label(v) + ")");
      }
      if (it->second.shape != v.shape) {
        throw ShapeError("input '" + v.name + "' (" + node_label(v) + "): expected shape " +
                         shape_to_string(v.shape) + ", got " + it->second.shape_str());
      }
      v.payload = it->second;
      break;
    }
    case OpKind::Param: {
      const Tensor& p = store_->value(v.name);
      if (p.shape != v.shape) {
        throw ShapeError("param '" + v.name + "' (" + node_label(v) + "): expected shape " +
                         shape_to_string(v.shape) + ", got " + p.shape_str());
      }
      v.payload = p;
      break;
    }
    case OpKind::MatMul: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      const Tensor& b = nodes_[v.parents[1]].payload;
      v.payload = gemm(a, b, v.trans_a, v.trans_b);
      break;
    }
    case OpKind::Add: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      const Tensor& b = nodes_[v.parents[1]].payload;
      Tensor out = a;
      if (a.shape == b.shape) {
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
      } else {
        const std::size_t n = a.shape[0], m = a.shape[1];
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) out.data[i * m + j] += b.data[j];
        }
      }
      v.payload = std::move(out);
      break;
    }
    case OpKind::Sub: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      const Tensor& b = nodes_[v.parents[1]].payload;
      Tensor out = a;
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
      v.payload = std::move(out);
      break;
    }
    case OpKind::Mul: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      const Tensor& b = nodes_[v.parents[1]].payload;
      if (a.shape == b.shape) {
        Tensor out = a;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
        v.payload = std::move(out);
      } else if (a.numel() == 1) {
        Tensor out = b;
        for (double& x : out.data) x *= a.data[0];
        v.payload = std::move(out);
      } else {
        Tensor out = a;
        for (double& x : out.data) x *= b.data[0];
        v.payload = std::move(out);
      }
      break;
    }
    case OpKind::MaskMul: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      Tensor out = a;
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= v.fixed.data[i];
      v.payload = std::move(out);
      break;
    }
    case OpKind::Concat: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      const Tensor& b = nodes_[v.parents[1]].payload;
      Tensor out = Tensor::zeros(v.shape);
      if (a.rank() == 1) {
        std::copy(a.data.begin(), a.data.end(), out.data.begin());
        std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
      } else {
        const std::size_t n = a.shape[0], wa = a.shape[1], wb = b.shape[1];
        for (std::size_t i = 0; i < n; ++i) {
          std::copy(a.data.begin() + i * wa, a.data.begin() + (i + 1) * wa,
                    out.data.begin() + i * (wa + wb));
          std::copy(b.data.begin() + i * wb, b.data.begin() + (i + 1) * wb,
                    out.data.begin() + i * (wa + wb) + wa);
        }
      }
      v.payload = std::move(out);
      break;
    }
    case OpKind::Relu: {
      Tensor out = nodes_[v.parents[0]].payload;
      for (double& x : out.data) x = x > 0.0 ? x : 0.0;
      v.payload = std::move(out);
      break;
    }
    case OpKind::LeakyRelu: {
      Tensor out = nodes_[v.parents[0]].payload;
      for (double& x : out.data) x = x > 0.0 ? x : v.slope * x;
      v.payload = std::move(out);
      break;
    }
    case OpKind::SoftmaxXent: {
      const Tensor& logits = nodes_[v.parents[0]].payload;
      const std::size_t n = logits.shape[0], k = logits.shape[1];
      Tensor nll = Tensor::zeros({n});
      Tensor probs = Tensor::zeros({n, k});
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = logits.data.data() + i * k;
        double mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
        const double lse = mx + std::log(denom);
        for (std::size_t j = 0; j < k; ++j) probs.data[i * k + j] = std::exp(row[j] - lse);
        nll.data[i] = lse - row[v.targets[i]];
      }
      v.aux = std::move(probs);
      v.payload = std::move(nll);
      break;
    }
    case OpKind::RowL2Norm: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      const std::size_t n = a.shape[0], m = a.shape[1];
      Tensor out = Tensor::zeros({n});
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const double x = a.data[i * m + j];
          acc += x * x;
        }
        out.data[i] = std::sqrt(acc);
      }
      v.payload = std::move(out);
      break;
    }
    case OpKind::Mean: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      double acc = 0.0;
      for (double x : a.data) acc += x;
      v.payload = Tensor::scalar(acc / double(a.numel()));
      break;
    }
    case OpKind::Sum: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      double acc = 0.0;
      for (double x : a.data) acc += x;
      v.payload = Tensor::scalar(acc);
      break;
    }
    case OpKind::ScalarAffine: {
      Tensor out = nodes_[v.parents[0]].payload;
      for (double& x : out.data) x = v.factor * x + v.offset;
      v.payload = std::move(out);
      break;
    }
    case OpKind::Reshape: {
      Tensor out = nodes_[v.parents[0]].payload;
      out.shape = v.shape;
      v.payload = std::move(out);
      break;
    }
  }
  v.has_payload = true;
}

void Graph::add_grad(NodeId parent, const Tensor& contribution) {
  Tensor& g = nodes_[parent].grad;
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += contribution.data[i];
}

void Graph::backprop_node(const Value& v) {
  const Tensor& g = v.grad;
  switch (v.op) {
    case OpKind::Constant:
    case OpKind::Input:
    case OpKind::Param:
      break;
    case OpKind::MatMul: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      const Tensor& b = nodes_[v.parents[1]].payload;
      Tensor da = gemm(g, b, false, !v.trans_b);
      if (v.trans_a) da = transpose(da);
      Tensor db = gemm(a, g, !v.trans_a, false);
      if (v.trans_b) db = transpose(db);
      add_grad(v.parents[0], da);
      add_grad(v.parents[1], db);
      break;
    }
    case OpKind::Add: {
      add_grad(v.parents[0], g);
      Value& pb = nodes_[v.parents[1]];
      if (pb.shape == v.shape) {
        add_grad(v.parents[1], g);
      } else {
        // Row-broadcast bias: accumulate column sums, rows in ascending order.
        const std::size_t n = v.shape[0], m = v.shape[1];
        Tensor db = Tensor::zeros(pb.shape);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) db.data[j] += g.data[i * m + j];
        }
        add_grad(v.parents[1], db);
      }
      break;
    }
    case OpKind::Sub: {
      add_grad(v.parents[0], g);
      Tensor neg = g;
      for (double& x : neg.data) x = -x;
      add_grad(v.parents[1], neg);
      break;
    }
    case OpKind::Mul: {
      const Tensor& a = nodes_[v.parents[0]].payload;
      const Tensor& b = nodes_[v.parents[1]].payload;
      if (a.shape == b.shape) {
        Tensor da = g, db = g;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          da.data[i] *= b.data[i];
          db.data[i] *= a.data[i];
        }
        add_grad(v.parents[0], da);
        add_grad(v.parents[1], db);
      } else if (a.numel() == 1) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.data.size(); ++i) acc += g.data[i] * b.data[i];
        add_grad(v.parents[0], Tensor(nodes_[v.parents[0]].shape, {acc}));
        Tensor db = g;
        for (double& x : db.data) x *= a.data[0];
        add_grad(v.parents[1], db);
      } else {
        Tensor da = g;
        for (double& x : da.data) x *= b.data[0];
        add_grad(v.parents[0], da);
        double acc = 0.0;
        for (std::size_t i = 0; i < g.data.size(); ++i) acc += g.data[i] * a.data[i];
        add_grad(v.parents[1], Tensor(nodes_[v.parents[1]].shape, {acc}));
      }
      break;
    }
    case OpKind::MaskMul: {
      Tensor da = g;
      for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] *= v.fixed.data[i];
      add_grad(v.parents[0], da);
      break;
    }
    case OpKind::Concat: {
      const Value& pa = nodes_[v.parents[0]];
      const Value& pb = nodes_[v.parents[1]];
      Tensor da = Tensor::zeros(pa.shape);
      Tensor db = Tensor::zeros(pb.shape);
      if (pa.shape.size() == 1) {
        const std::size_t wa = pa.shape[0];
        std::copy(g.data.begin(), g.data.begin() + wa, da.data.begin());
        std::copy(g.data.begin() + wa, g.data.end(), db.data.begin());
      } else {
        const std::size_t n = pa.shape[0], wa = pa.shape[1], wb = pb.shape[1];
        for (std::size_t i = 0; i < n; ++i) {
          std::copy(g.data.begin() + i * (wa + wb), g.data.begin() + i * (wa + wb) + wa,
                    da.data.begin() + i * wa);
          std::copy(g.data.begin() + i * (wa + wb) + wa,
                    g.data.begin() + (i + 1) * (wa + wb), db.data.begin() + i * wb);
        }
      }
      add_grad(v.parents[0], da);
      add_grad(v.parents[1], db);
      break;
    }
    case OpKind::Relu: {
      const Tensor& x = nodes_[v.parents[0]].payload;
      Tensor da = g;
      for (std::size_t i = 0; i < da.data.size(); ++i) {
        if (!(x.data[i] > 0.0)) da.data[i] = 0.0;
      }
      add_grad(v.parents[0], da);
      break;
    }
    case OpKind::LeakyRelu: {
      const Tensor& x = nodes_[v.parents[0]].payload;
      Tensor da = g;
      for (std::size_t i = 0; i < da.data.size(); ++i) {
        if (!(x.data[i] > 0.0)) da.data[i] *= v.slope;
      }
      add_grad(v.parents[0], da);
      break;
    }
    case OpKind::SoftmaxXent: {
      const Value& pl = nodes_[v.parents[0]];
      const std::size_t n = pl.shape[0], k = pl.shape[1];
      Tensor da = Tensor::zeros(pl.shape);
      for (std::size_t i = 0; i < n; ++i) {
        const double gi = g.data[i];
        for (std::size_t j = 0; j < k; ++j) {
          double p = v.aux.data[i * k + j];
          if (j == v.targets[i]) p -= 1.0;
          da.data[i * k + j] = gi * p;
        }
      }
      add_grad(v.parents[0], da);
      break;
    }
    case OpKind::RowL2Norm: {
      const Tensor& x = nodes_[v.parents[0]].payload;
      const std::size_t n = x.shape[0], m = x.shape[1];
      Tensor da = Tensor::zeros(x.shape);
      for (std::size_t i = 0; i < n; ++i) {
        const double norm = v.payload.data[i];
        if (norm == 0.0) continue;  // subgradient 0 at the origin
        const double gi = g.data[i] / norm;
        for (std::size_t j = 0; j < m; ++j) da.data[i * m + j] = gi * x.data[i * m + j];
      }
      add_grad(v.parents[0], da);
      break;
    }
    case OpKind::Mean: {
      const Value& pa = nodes_[v.parents[0]];
      const double gi = g.data[0] / double(shape_numel(pa.shape));
      add_grad(v.parents[0], Tensor::full(pa.shape, gi));
      break;
    }
    case OpKind::Sum: {
      const Value& pa = nodes_[v.parents[0]];
      add_grad(v.parents[0], Tensor::full(pa.shape, g.data[0]));
      break;
    }
    case OpKind::ScalarAffine: {
      Tensor da = g;
      for (double& x : da.data) x *= v.factor;
      add_grad(v.parents[0], da);
      break;
    }
    case OpKind::Reshape: {
      Tensor da = g;
      da.shape = nodes_[v.parents[0]].shape;
      add_grad(v.parents[0], da);
      break;
    }
  }
}

GradMap Graph::backward(NodeId root) {
  const Value& r = checked(root, "backward");
  if (!forward_valid_ || last_root_ != root) {
    throw ValidationError("backward(" + std::to_string(root) +
                          ") requires a prior forward of the same root");
  }
  if (shape_numel(r.shape) != 1) {
    throw ValidationError("backward root must be scalar, " + node_label(r) +
                          " has shape " + shape_to_string(r.shape));
  }

  const std::vector<NodeId> order = ancestors(root);
  for (NodeId id : order) {
    nodes_[id].grad = Tensor::zeros(nodes_[id].shape);
    nodes_[id].has_grad = true;
  }
  nodes_[root].grad.data[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) backprop_node(nodes_[*it]);

  GradMap out;
  for (const std::string& name : store_->trainable_names()) {
    out.emplace(name, Tensor::zeros(store_->value(name).shape));
  }
  for (NodeId id : order) {
    const Value& v = nodes_[id];
    if (v.op == OpKind::Param && store_->trainable(v.name)) {
      Tensor& acc = out[v.name];
      for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += v.grad.data[i];
    }
  }
  return out;
}

}  // namespace cafv
