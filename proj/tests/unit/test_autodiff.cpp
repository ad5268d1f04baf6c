#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "hypernoise/autodiff.hpp"
#include "hypernoise/errors.hpp"
#include "hypernoise/rng.hpp"

using namespace hypernoise;

namespace {

using Builder = std::function<NodeId(Graph&, NodeId, NodeId)>;

struct Case {
  const char* name;
  Shape a, b;
  Builder build;
};

// Scalar probe <W, op(a, b)> with a random weight W so every output entry matters.
double max_rel_error(const Case& c, std::uint64_t seed) {
  Rng rng(seed);
  Bindings bind{{"a", rng.normal_matrix(c.a[0], c.a[1])}, {"b", rng.normal_matrix(c.b[0], c.b[1])}};
  Graph probe;
  NodeId out_a = probe.input("a"), out_b = probe.input("b");
  probe.set_root(c.build(probe, out_a, out_b));
  const Tensor shape_out = probe.forward(bind);
  const Tensor w = rng.normal_matrix(shape_out.rows(), shape_out.cols());

  Graph g;
  NodeId a = g.input("a"), b = g.input("b");
  NodeId y = c.build(g, a, b);
  g.set_root(g.sum(g.mul(y, g.constant(w))));
  g.forward(bind);
  const Gradients grads = g.backward();

  double worst = 0.0;
  const double eps = 1e-6;
  for (const char* name : {"a", "b"}) {
    Tensor& x = bind[name];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i];
      x[i] = keep + eps;
      const double up = g.forward(bind).item();
      x[i] = keep - eps;
      const double down = g.forward(bind).item();
      x[i] = keep;
      const double fd = (up - down) / (2 * eps);
      const double ad = grads.at(name)[i];
      worst = std::max(worst, std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1.0}));
    }
  }
  return worst;
}

std::vector<Case> cases() {
  return {
      {"matmul", {3, 4}, {4, 2}, [](Graph& g, NodeId a, NodeId b) { return g.matmul(a, b); }},
      {"matmul_nt", {3, 4}, {5, 4}, [](Graph& g, NodeId a, NodeId b) { return g.matmul_nt(a, b); }},
      {"add", {3, 4}, {3, 4}, [](Graph& g, NodeId a, NodeId b) { return g.add(a, b); }},
      {"add_row", {3, 4}, {1, 4}, [](Graph& g, NodeId a, NodeId b) { return g.add(a, b); }},
      {"sub", {3, 4}, {3, 4}, [](Graph& g, NodeId a, NodeId b) { return g.sub(a, b); }},
      {"mul", {3, 4}, {3, 4}, [](Graph& g, NodeId a, NodeId b) { return g.mul(a, b); }},
      {"scale", {3, 4}, {3, 4}, [](Graph& g, NodeId a, NodeId b) { return g.add(g.scale(a, -1.7), g.scale(b, 0.0)); }},
      {"tanh", {3, 4}, {3, 4}, [](Graph& g, NodeId a, NodeId b) { return g.add(g.tanh(a), g.scale(b, 0.0)); }},
      {"sigmoid", {3, 4}, {3, 4}, [](Graph& g, NodeId a, NodeId b) { return g.add(g.sigmoid(a), g.scale(b, 0.0)); }},
      {"silu", {3, 4}, {3, 4}, [](Graph& g, NodeId a, NodeId b) { return g.add(g.silu(a), g.scale(b, 0.0)); }},
      {"sum", {3, 4}, {1, 1}, [](Graph& g, NodeId a, NodeId b) { return g.add(g.sum(a), b); }},
      {"row_sum", {3, 4}, {3, 1}, [](Graph& g, NodeId a, NodeId b) { return g.mul(g.row_sum(a), b); }},
      {"concat", {3, 4}, {3, 2}, [](Graph& g, NodeId a, NodeId b) { return g.concat_cols(a, b); }},
      {"append_ones", {3, 4}, {3, 5}, [](Graph& g, NodeId a, NodeId b) { return g.mul(g.append_ones_column(a), b); }},
      {"composite", {3, 4}, {4, 4}, [](Graph& g, NodeId a, NodeId b) {
         return g.mul(g.tanh(g.matmul(a, b)), g.sigmoid(g.matmul_nt(a, b)));
       }},
  };
}

}  // namespace

TEST(Autodiff, EveryPrimitiveMatchesCentralDifferences) {
  for (const auto& c : cases()) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      try {
        worst = std::max(worst, max_rel_error(c, s));
      } catch (const Error& e) {
        FAIL() << c.name << ": " << e.what();
      }
    }
    EXPECT_LT(worst, 1e-6) << c.name;
  }
}

TEST(Autodiff, ForwardValues) {
  Graph g;
  NodeId a = g.input("a");
  g.set_root(g.append_ones_column(g.scale(a, 2.0)));
  const Tensor y = g.forward({{"a", Tensor::matrix(2, 1, {1, 2})}});
  EXPECT_EQ(y, Tensor::matrix(2, 2, {2, 1, 4, 1}));
}

TEST(Autodiff, NonDifferentiableInputsGetNoGradient) {
  Graph g;
  NodeId a = g.input("a"), b = g.input("b", false);
  g.set_root(g.sum(g.mul(a, b)));
  g.forward({{"a", Tensor::vector({1, 2})}, {"b", Tensor::vector({3, 4})}});
  const auto grads = g.backward();
  EXPECT_EQ(grads.count("b"), 0u);
  EXPECT_EQ(grads.at("a").values(), (std::vector<double>{3, 4}));
}

TEST(Autodiff, BackwardBeforeForwardIsStateError) {
  Graph g;
  g.set_root(g.sum(g.input("a")));
  EXPECT_THROW(g.backward(), StateError);
}

TEST(Autodiff, ShapeMismatchIsReported) {
  Graph g;
  NodeId a = g.input("a"), b = g.input("b");
  g.set_root(g.matmul(a, b));
  EXPECT_THROW(g.forward({{"a", Tensor::zeros(2, 3)}, {"b", Tensor::zeros(2, 3)}}), ShapeError);
}

TEST(Autodiff, MissingBindingIsReported) {
  Graph g;
  g.set_root(g.sum(g.input("a")));
  EXPECT_THROW(g.forward({}), Error);
}

TEST(Autodiff, ReusedNodeAccumulatesGradient) {
  Graph g;
  NodeId a = g.input("a");
  g.set_root(g.sum(g.mul(a, a)));
  g.forward({{"a", Tensor::vector({3.0})}});
  EXPECT_DOUBLE_EQ(g.backward().at("a")[0], 6.0);
}
