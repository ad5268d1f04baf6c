#include "hypernoise/autodiff.hpp"

#include <cmath>

#include "hypernoise/errors.hpp"
#include "hypernoise/kernels.hpp"

namespace hypernoise {

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Silu: return "silu";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "silu") return Activation::Silu;
  throw ConfigError("unknown activation '" + name + "' (expected identity, tanh, sigmoid, silu)");
}

double activation_slope_bound(Activation act) {
  switch (act) {
    case Activation::Identity: return 1.0;
    case Activation::Tanh: return 1.0;
    case Activation::Sigmoid: return 0.25;
    // max of s(x)(1 + x(1 - s(x))), attained near x = 2.3994
    case Activation::Silu: return 1.0998;
  }
  return 1.0;
}

namespace {

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double apply_activation(Activation act, double x) {
  switch (act) {
    case Activation::Identity: return x;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return logistic(x);
    case Activation::Silu: return x * logistic(x);
  }
  return x;
}

namespace {

Tensor as_matrix(const Tensor& t) {
  if (t.rank() == 2) return t;
  return t.reshaped(Shape{t.rows(), t.cols()});
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

Graph::Node Graph::make_node(Op op, std::vector<NodeId> parents) {
  Node n;
  n.op = op;
  n.parents = std::move(parents);
  return n;
}

NodeId Graph::push(Node node) {
  for (auto p : node.parents) check_parent(p);
  nodes_.push_back(std::move(node));
  constants_.emplace_back();
  values_.emplace_back();
  has_forward_ = false;
  return nodes_.size() - 1;
}

void Graph::check_parent(NodeId id) const {
  if (id >= nodes_.size()) throw StateError("graph: parent node " + std::to_string(id) + " does not exist");
}

std::string Graph::describe(NodeId id) const {
  static const char* names[] = {"input",    "constant", "matmul", "matmul_nt", "add",   "add_row",  "sub",
                                "mul",      "scale",    "act",    "sum",       "row_sum", "concat", "append_ones"};
  std::string s = "node " + std::to_string(id) + " (" + names[static_cast<int>(nodes_[id].op)];
  if (!nodes_[id].name.empty()) s += " '" + nodes_[id].name + "'";
  return s + ")";
}

NodeId Graph::input(const std::string& name, bool differentiable) {
  for (const auto& n : nodes_) {
    if (n.op == Op::Input && n.name == name) throw StateError("graph: duplicate input name '" + name + "'");
  }
  Node n = make_node(Op::Input, {});
  n.name = name;
  n.differentiable = differentiable;
  return push(std::move(n));
}

NodeId Graph::constant(Tensor value) {
  auto id = push(make_node(Op::Constant, {}));
  constants_[id] = as_matrix(value);
  return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) { return push(make_node(Op::MatMul, {a, b})); }
NodeId Graph::matmul_nt(NodeId a, NodeId b) { return push(make_node(Op::MatMulNT, {a, b})); }
NodeId Graph::add(NodeId a, NodeId b) { return push(make_node(Op::Add, {a, b})); }
NodeId Graph::sub(NodeId a, NodeId b) { return push(make_node(Op::Sub, {a, b})); }
NodeId Graph::mul(NodeId a, NodeId b) { return push(make_node(Op::Mul, {a, b})); }

NodeId Graph::scale(NodeId a, double factor) {
  Node n = make_node(Op::Scale, {a});
  n.factor = factor;
  return push(std::move(n));
}

NodeId Graph::activation(Activation act, NodeId a) {
  Node n = make_node(Op::Act, {a});
  n.act = act;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId a) { return push(make_node(Op::Sum, {a})); }
NodeId Graph::row_sum(NodeId a) { return push(make_node(Op::RowSum, {a})); }
NodeId Graph::concat_cols(NodeId a, NodeId b) { return push(make_node(Op::Concat, {a, b})); }
NodeId Graph::append_ones_column(NodeId a) { return push(make_node(Op::AppendOnes, {a})); }

void Graph::set_root(NodeId root) {
  check_parent(root);
  root_ = root;
}

NodeId Graph::root() const {
  if (nodes_.empty()) throw StateError("graph: empty graph has no root");
  return root_ == static_cast<NodeId>(-1) ? nodes_.size() - 1 : root_;
}

const Tensor& Graph::value(NodeId id) const {
  if (!has_forward_) throw StateError("graph: value() requested before forward()");
  check_parent(id);
  return values_[id];
}

void Graph::eval_node(NodeId id, const Bindings& bindings) {
  const Node& n = nodes_[id];
  auto shape_error = [&](const std::string& detail) { return ShapeError(describe(id) + ": " + detail); };
  auto pv = [&](std::size_t k) -> const Tensor& { return values_[n.parents[k]]; };

  switch (n.op) {
    case Op::Input: {
      auto it = bindings.find(n.name);
      if (it == bindings.end()) throw StateError(describe(id) + ": no binding supplied");
      if (it->second.rank() > 2) throw shape_error("inputs must have rank <= 2");
      input_shapes_[id] = it->second.shape();
      values_[id] = as_matrix(it->second);
      break;
    }
    case Op::Constant: values_[id] = constants_[id]; break;
    case Op::MatMul: {
      const auto& a = pv(0);
      const auto& b = pv(1);
      if (a.cols() != b.rows()) {
        throw shape_error("inner dimensions differ: " + shape_to_string(a.shape()) + " * " +
                          shape_to_string(b.shape()));
      }
      Tensor c = Tensor::zeros(a.rows(), b.cols());
      kernels::matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
      values_[id] = std::move(c);
      break;
    }
    case Op::MatMulNT: {
      const auto& a = pv(0);
      const auto& b = pv(1);
      if (a.cols() != b.cols()) {
        throw shape_error("inner dimensions differ: " + shape_to_string(a.shape()) + " * " +
                          shape_to_string(b.shape()) + "^T");
      }
      Tensor c = Tensor::zeros(a.rows(), b.rows());
      kernels::matmul_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
      values_[id] = std::move(c);
      break;
    }
    case Op::Add:
    case Op::AddRow:
    case Op::Sub:
    case Op::Mul: {
      const auto& a = pv(0);
      const auto& b = pv(1);
      Tensor c = a;
      auto cd = c.data();
      auto bd = b.data();
      const bool same = a.rows() == b.rows() && a.cols() == b.cols();
      const bool row_broadcast = !same && b.rows() == 1 && b.cols() == a.cols();
      if (!same && !(row_broadcast && n.op == Op::Add) && !(row_broadcast && n.op == Op::AddRow)) {
        throw shape_error("operand shapes differ: " + shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
      }
      if (row_broadcast) {
        nodes_[id].op = Op::AddRow;
        const auto cols = a.cols();
        for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i % cols];
      } else if (n.op == Op::Add || n.op == Op::AddRow) {
        nodes_[id].op = Op::Add;
        for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
      } else if (n.op == Op::Sub) {
        for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
      } else {
        for (std::size_t i = 0; i < cd.size(); ++i) cd[i] *= bd[i];
      }
      values_[id] = std::move(c);
      break;
    }
    case Op::Scale: {
      Tensor c = pv(0);
      for (auto& v : c.data()) v *= n.factor;
      values_[id] = std::move(c);
      break;
    }
    case Op::Act: {
      Tensor c = pv(0);
      for (auto& v : c.data()) v = apply_activation(n.act, v);
      values_[id] = std::move(c);
      break;
    }
    case Op::Sum: {
      double s = 0.0;
      for (double v : pv(0).data()) s += v;
      values_[id] = Tensor::scalar(s);
      break;
    }
    case Op::RowSum: {
      const auto& a = pv(0);
      Tensor c = Tensor::zeros(a.rows(), 1);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (double v : a.row(i)) s += v;
        c[i] = s;
      }
      values_[id] = std::move(c);
      break;
    }
    case Op::Concat: {
      const auto& a = pv(0);
      const auto& b = pv(1);
      if (a.rows() != b.rows()) {
        throw shape_error("row counts differ: " + shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
      }
      Tensor c = Tensor::zeros(a.rows(), a.cols() + b.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = c.row(i);
        std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
        std::copy(b.row(i).begin(), b.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
      }
      values_[id] = std::move(c);
      break;
    }
    case Op::AppendOnes: {
      const auto& a = pv(0);
      Tensor c = Tensor::zeros(a.rows(), a.cols() + 1);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = c.row(i);
        std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
        dst[a.cols()] = 1.0;
      }
      values_[id] = std::move(c);
      break;
    }
  }
}

Tensor Graph::forward(const Bindings& bindings) {
  if (nodes_.empty()) throw StateError("graph: forward on empty graph");
  has_forward_ = false;
  for (NodeId id = 0; id < nodes_.size(); ++id) eval_node(id, bindings);
  has_forward_ = true;
  return values_[root()];
}

Gradients Graph::backward() {
  if (!has_forward_) throw StateError("graph: backward() called before forward()");
  const auto& r = values_[root()];
  return backward(Tensor(r.shape(), 1.0));
}

Gradients Graph::backward(const Tensor& seed) {
  if (!has_forward_) throw StateError("graph: backward() called before forward()");
  const NodeId top = root();
  if (seed.size() != values_[top].size()) {
    throw ShapeError("graph: backward seed shape " + shape_to_string(seed.shape()) + " does not match root " +
                     shape_to_string(values_[top].shape()));
  }

  // Which nodes lie on a path from a differentiable input.
  std::vector<char> needs(nodes_.size(), 0);
  for (NodeId id = 0; id <= top; ++id) {
    const Node& n = nodes_[id];
    if (n.op == Op::Input) {
      needs[id] = n.differentiable;
    } else {
      for (auto p : n.parents) needs[id] = needs[id] || needs[p];
    }
  }

  std::vector<Tensor> grads(top + 1);
  std::vector<char> has(top + 1, 0);
  auto accumulate = [&](NodeId p, Tensor g) {
    if (!needs[p]) return;
    if (has[p]) {
      add_into(grads[p], g);
    } else {
      grads[p] = std::move(g);
      has[p] = 1;
    }
  };

  grads[top] = seed.reshaped(values_[top].shape());
  has[top] = 1;

  for (NodeId id = top + 1; id-- > 0;) {
    if (!has[id] || !needs[id]) continue;
    const Node& n = nodes_[id];
    const Tensor& g = grads[id];
    switch (n.op) {
      case Op::Input:
      case Op::Constant: break;
      case Op::MatMul: {
        const auto& a = values_[n.parents[0]];
        const auto& b = values_[n.parents[1]];
        if (needs[n.parents[0]]) {
          Tensor da = Tensor::zeros(a.rows(), a.cols());
          kernels::matmul_nt(g.data(), b.data(), da.data(), a.rows(), b.cols(), a.cols());
          accumulate(n.parents[0], std::move(da));
        }
        if (needs[n.parents[1]]) {
          Tensor db = Tensor::zeros(b.rows(), b.cols());
          kernels::matmul_tn(a.data(), g.data(), db.data(), a.cols(), a.rows(), b.cols());
          accumulate(n.parents[1], std::move(db));
        }
        break;
      }
      case Op::MatMulNT: {
        const auto& a = values_[n.parents[0]];
        const auto& b = values_[n.parents[1]];
        if (needs[n.parents[0]]) {
          Tensor da = Tensor::zeros(a.rows(), a.cols());
          kernels::matmul(g.data(), b.data(), da.data(), a.rows(), b.rows(), a.cols());
          accumulate(n.parents[0], std::move(da));
        }
        if (needs[n.parents[1]]) {
          Tensor db = Tensor::zeros(b.rows(), b.cols());
          kernels::matmul_tn(g.data(), a.data(), db.data(), b.rows(), a.rows(), a.cols());
          accumulate(n.parents[1], std::move(db));
        }
        break;
      }
      case Op::Add: {
        accumulate(n.parents[0], g);
        accumulate(n.parents[1], g);
        break;
      }
      case Op::AddRow: {
        accumulate(n.parents[0], g);
        if (needs[n.parents[1]]) {
          const auto& b = values_[n.parents[1]];
          Tensor db(b.shape(), 0.0);
          const auto cols = g.cols();
          auto gd = g.data();
          for (std::size_t i = 0; i < gd.size(); ++i) db[i % cols] += gd[i];
          accumulate(n.parents[1], std::move(db));
        }
        break;
      }
      case Op::Sub: {
        accumulate(n.parents[0], g);
        if (needs[n.parents[1]]) {
          Tensor neg = g;
          for (auto& v : neg.data()) v = -v;
          accumulate(n.parents[1], std::move(neg));
        }
        break;
      }
      case Op::Mul: {
        const auto& a = values_[n.parents[0]];
        const auto& b = values_[n.parents[1]];
        if (needs[n.parents[0]]) {
          Tensor da = g;
          for (std::size_t i = 0; i < da.size(); ++i) da[i] *= b[i];
          accumulate(n.parents[0], std::move(da));
        }
        if (needs[n.parents[1]]) {
          Tensor db = g;
          for (std::size_t i = 0; i < db.size(); ++i) db[i] *= a[i];
          accumulate(n.parents[1], std::move(db));
        }
        break;
      }
      case Op::Scale: {
        Tensor da = g;
        for (auto& v : da.data()) v *= n.factor;
        accumulate(n.parents[0], std::move(da));
        break;
      }
      case Op::Act: {
        const auto& x = values_[n.parents[0]];
        const auto& y = values_[id];
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) {
          double slope = 1.0;
          switch (n.act) {
            case Activation::Identity: break;
            case Activation::Tanh: slope = 1.0 - y[i] * y[i]; break;
            case Activation::Sigmoid: slope = y[i] * (1.0 - y[i]); break;
            case Activation::Silu: {
              const double s = logistic(x[i]);
              slope = s + x[i] * s * (1.0 - s);
              break;
            }
          }
          da[i] *= slope;
        }
        accumulate(n.parents[0], std::move(da));
        break;
      }
      case Op::Sum: {
        const auto& a = values_[n.parents[0]];
        accumulate(n.parents[0], Tensor(a.shape(), g.item()));
        break;
      }
      case Op::RowSum: {
        const auto& a = values_[n.parents[0]];
        Tensor da(a.shape(), 0.0);
        for (std::size_t i = 0; i < a.rows(); ++i) {
          for (auto& v : da.row(i)) v = g[i];
        }
        accumulate(n.parents[0], std::move(da));
        break;
      }
      case Op::Concat: {
        const auto& a = values_[n.parents[0]];
        const auto& b = values_[n.parents[1]];
        Tensor da = Tensor::zeros(a.rows(), a.cols());
        Tensor db = Tensor::zeros(b.rows(), b.cols());
        for (std::size_t i = 0; i < a.rows(); ++i) {
          auto src = g.row(i);
          std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(a.cols()), da.row(i).begin());
          std::copy(src.begin() + static_cast<std::ptrdiff_t>(a.cols()), src.end(), db.row(i).begin());
        }
        accumulate(n.parents[0], std::move(da));
        accumulate(n.parents[1], std::move(db));
        break;
      }
      case Op::AppendOnes: {
        const auto& a = values_[n.parents[0]];
        Tensor da = Tensor::zeros(a.rows(), a.cols());
        for (std::size_t i = 0; i < a.rows(); ++i) {
          auto src = g.row(i);
          std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(a.cols()), da.row(i).begin());
        }
        accumulate(n.parents[0], std::move(da));
        break;
      }
    }
  }

  Gradients out;
  for (NodeId id = 0; id <= top; ++id) {
    const Node& n = nodes_[id];
    if (n.op != Op::Input || !n.differentiable) continue;
    const auto& shape = input_shapes_.at(id);
    if (has[id]) {
      out.emplace(n.name, grads[id].reshaped(shape));
    } else {
      out.emplace(n.name, Tensor(shape, 0.0));
    }
  }
  return out;
}

}  // namespace hypernoise
