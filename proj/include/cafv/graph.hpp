#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cafv/param_store.hpp"
#include "cafv/tensor.hpp"

namespace cafv {

using NodeId = std::uint32_t;
using Bindings = std::map<std::string, Tensor>;

enum class OpKind {
  Constant,
  Input,
  Param,
  MatMul,
  Add,
  Sub,
  Mul,
  MaskMul,
  Concat,
  Relu,
  LeakyRelu,
  SoftmaxXent,
  RowL2Norm,
  Mean,
  Sum,
  ScalarAffine,
  Reshape,
};

const char* op_name(OpKind op);

struct Value {
  NodeId id = 0;
  OpKind op = OpKind::Constant;
  std::vector<NodeId> parents;
  std::vector<std::size_t> shape;  // inferred at construction

  Tensor payload;  // forward cache
  bool has_payload = false;
  Tensor grad;     // backward accumulator
  bool has_grad = false;

  // Per-op attributes (only the relevant ones are set).
  std::string name;                   // Param / Input
  Tensor fixed;                       // Constant value or MaskMul mask
  std::vector<std::size_t> targets;   // SoftmaxXent class indices, one per row
  double factor = 1.0;                // ScalarAffine multiplier
  double offset = 0.0;                // ScalarAffine addend
  double slope = 0.0;                 // LeakyRelu
  bool trans_a = false;               // MatMul
  bool trans_b = false;               // MatMul
  Tensor aux;                         // SoftmaxXent softmax cache
};

// Reverse-mode autodiff over an explicit DAG of Values. Nodes are appended
// in construction order, so ascending ids form a valid topological order.
// Reductions and gradient accumulation always run in that fixed order,
// which makes forward and backward bit-reproducible.
//
// Leaves are constants, named inputs (bound per forward call), and named
// parameters resolved from the attached ParamStore at evaluation time.
class Graph {
 public:
  explicit Graph(const ParamStore* store);

  NodeId constant(Tensor value);
  NodeId input(const std::string& name, std::vector<std::size_t> shape);
  NodeId param(const std::string& name);  // one node per name, cached

  NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);
  NodeId add(NodeId a, NodeId b);  // same shape, or b a row vector broadcast over rows of a
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // same shape, or either operand a scalar
  NodeId mask_mul(NodeId a, Tensor mask);  // elementwise, mask held constant
  NodeId concat(NodeId a, NodeId b);       // along the last axis
  NodeId relu(NodeId a);
  NodeId leaky_relu(NodeId a, double slope);
  // Per-row negative log-likelihood of the target class under softmax(logits).
  NodeId softmax_xent(NodeId logits, std::vector<std::size_t> targets);
  NodeId row_l2_norm(NodeId a);  // [n, m] -> [n]
  NodeId mean(NodeId a);         // full reduction -> [1]
  NodeId sum(NodeId a);          // full reduction -> [1]
  NodeId scalar_affine(NodeId a, double factor, double offset);
  NodeId reshape(NodeId a, std::vector<std::size_t> shape);

  Tensor forward(NodeId root);
  Tensor forward(NodeId root, const Bindings& bindings);
  // Evaluates along the caller-supplied order, which must be a topological
  // ordering of exactly the ancestors of root. Any valid order gives
  // bit-identical payloads.
  Tensor forward(NodeId root, const Bindings& bindings, const std::vector<NodeId>& order);

  // d(root)/d(param) for every trainable parameter in the store; parameters
  // the graph never touches get zero gradients. Requires a prior forward of
  // the same root; the root must be scalar.
  GradMap backward(NodeId root);

  void reset();  // invalidates cached payloads

  std::vector<NodeId> ancestors(NodeId root) const;  // ascending ids
  const Value& node(NodeId id) const;
  const Tensor& payload(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  const ParamStore* store() const { return store_; }

 private:
  NodeId push(Value v);
  const Value& checked(NodeId id, const char* what) const;
  void eval_node(Value& v, const Bindings& bindings);
  void backprop_node(const Value& v);
  void add_grad(NodeId parent, const Tensor& contribution);

  const ParamStore* store_;
  std::vector<Value> nodes_;
  std::map<std::string, NodeId> param_nodes_;
  NodeId last_root_ = 0;
  bool forward_valid_ = false;
};

}  // namespace cafv
