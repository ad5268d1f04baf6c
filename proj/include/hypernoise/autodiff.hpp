#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "hypernoise/tensor.hpp"

namespace hypernoise {

enum class Activation { Identity, Tanh, Sigmoid, Silu };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);
/// Upper bound on |act'(x)| over the real line.
double activation_slope_bound(Activation act);
double apply_activation(Activation act, double x);

using NodeId = std::size_t;
using Bindings = std::map<std::string, Tensor>;
using Gradients = std::map<std::string, Tensor>;

/// Reverse-mode automatic differentiation over a static tape.
///
/// Nodes are appended in topological order; the last node is the root unless
/// `set_root` says otherwise. Values are rank-2 row-major matrices whose rows
/// are batch samples (rank-1 bindings are treated as a single row). A graph
/// can be evaluated repeatedly with different bindings; shapes are checked at
/// each forward pass.
///
/// A Graph holds per-evaluation state and must not be shared between threads.
class Graph {
 public:
  NodeId input(const std::string& name, bool differentiable = true);
  NodeId constant(Tensor value);

  NodeId matmul(NodeId a, NodeId b);     ///< a (r x k) * b (k x c)
  NodeId matmul_nt(NodeId a, NodeId b);  ///< a (r x k) * b^T, b is (c x k)
  NodeId add(NodeId a, NodeId b);        ///< same shape, or b a single row broadcast over a's rows
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  ///< elementwise
  NodeId scale(NodeId a, double factor);
  NodeId activation(Activation act, NodeId a);
  NodeId tanh(NodeId a) { return activation(Activation::Tanh, a); }
  NodeId sigmoid(NodeId a) { return activation(Activation::Sigmoid, a); }
  NodeId silu(NodeId a) { return activation(Activation::Silu, a); }
  NodeId sum(NodeId a);               ///< scalar total
  NodeId row_sum(NodeId a);           ///< (r x c) -> (r x 1)
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId append_ones_column(NodeId a);  ///< [a | 1]

  void set_root(NodeId root);
  NodeId root() const;
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Evaluates every node and returns the root value.
  Tensor forward(const Bindings& bindings);
  /// Value of any node from the last forward pass.
  const Tensor& value(NodeId id) const;

  /// Gradients of <seed, root> w.r.t. every differentiable input, keyed by input name.
  /// The seed must have the root's shape.
  Gradients backward(const Tensor& seed);
  /// Seed of ones; for scalar roots this is d root / d inputs.
  Gradients backward();

 private:
  enum class Op {
    Input,
    Constant,
    MatMul,
    MatMulNT,
    Add,
    AddRow,
    Sub,
    Mul,
    Scale,
    Act,
    Sum,
    RowSum,
    Concat,
    AppendOnes,
  };

  struct Node {
    Op op = Op::Input;
    std::vector<NodeId> parents;
    std::string name;  // inputs only
    bool differentiable = false;
    double factor = 0.0;
    Activation act = Activation::Identity;
  };

  static Node make_node(Op op, std::vector<NodeId> parents);
  NodeId push(Node node);
  void check_parent(NodeId id) const;
  std::string describe(NodeId id) const;
  void eval_node(NodeId id, const Bindings& bindings);

  std::vector<Node> nodes_;
  std::vector<Tensor> constants_;  // indexed by node id (empty tensor for non-constants)
  std::vector<Tensor> values_;
  std::map<NodeId, Shape> input_shapes_;
  NodeId root_ = static_cast<NodeId>(-1);
  bool has_forward_ = false;
};

}  // namespace hypernoise
