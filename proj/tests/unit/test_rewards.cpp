#include <gtest/gtest.h>

#include <cmath>

#include "hypernoise/errors.hpp"
#include "hypernoise/linalg.hpp"
#include "hypernoise/rewards.hpp"
#include "hypernoise/rng.hpp"

using namespace hypernoise;

namespace {

Reward sample_composite() {
  return Reward::composite({{Reward::linear(Tensor::vector({1, -1, 0.5, 0, 2, 1})), 0.5},
                            {Reward::quadratic(Tensor::identity(6), -1.0), 2.0},
                            {Reward::redness(3.0), 1.0}});
}

}  // namespace

TEST(Rewards, RednessOfPureColours) {
  const Reward r = Reward::redness(1.0);
  // 2 pixels, channel-major: red block, green block, blue block
  EXPECT_DOUBLE_EQ(r.evaluate(Tensor::vector({1, 1, 0, 0, 0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(r.evaluate(Tensor::vector({0, 0, 1, 1, 1, 1})), -1.0);
  EXPECT_DOUBLE_EQ(r.evaluate(Tensor::vector({0.3, 0.3, 0.3, 0.3, 0.3, 0.3})), 0.0);
  EXPECT_DOUBLE_EQ(Reward::redness(0.01).evaluate(Tensor::vector({1, 0, 0})), 0.01);
}

TEST(Rewards, QuadraticValue) {
  const Reward r = Reward::quadratic(Tensor::matrix(2, 2, {2, 1, 1, 3}), -1.0);
  EXPECT_DOUBLE_EQ(r.evaluate(Tensor::vector({1, 2})), -0.5 * (2 + 4 + 12));
}

TEST(Rewards, GradientsMatchFd) {
  Rng rng(2);
  for (const Reward& r : {Reward::linear(rng.normal_vector(6)), Reward::quadratic(Tensor::identity(6), 1.0),
                          Reward::redness(5.0), sample_composite()}) {
    const Tensor x = rng.normal_vector(6);
    const Tensor g = r.gradient(x);
    const Tensor fd = linalg::gradient_fd([&](const Tensor& v) { return r.evaluate(v); }, x);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(g[i], fd[i], 1e-8) << r.describe();
  }
}

TEST(Rewards, GraphMatchesEvaluate) {
  Rng rng(3);
  const Reward r = sample_composite();
  const Tensor x = rng.normal_matrix(5, 6);
  Graph g;
  NodeId xn = g.input("x");
  g.set_root(r.build(g, xn, 6));
  const Tensor out = g.forward({{"x", x}});
  const auto ref = r.evaluate_batch(x);
  ASSERT_EQ(out.rows(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(out[i], ref[i], 1e-12);
}

TEST(Rewards, RangeOverBoxContainsSamples) {
  Rng rng(4);
  const Reward r = sample_composite();
  const auto box = r.range_over_box(6, 0.0, 1.0);
  ASSERT_TRUE(box);
  for (int i = 0; i < 1000; ++i) {
    Tensor x(Shape{6});
    for (std::size_t j = 0; j < 6; ++j) x[j] = rng.uniform();
    const double v = r.evaluate(x);
    EXPECT_GE(v, box->lo - 1e-12);
    EXPECT_LE(v, box->hi + 1e-12);
  }
  const auto red = Reward::redness(2.0).range_over_box(3, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(red->lo, -2.0);
  EXPECT_DOUBLE_EQ(red->hi, 2.0);
}

TEST(Rewards, ZeroReward) {
  const Reward z = Reward::zero(4);
  EXPECT_TRUE(z.is_identically_zero());
  EXPECT_EQ(z.evaluate(Tensor::vector({1, 2, 3, 4})), 0.0);
  EXPECT_FALSE(Reward::redness(1.0).is_identically_zero());
}

TEST(Rewards, InvalidInputs) {
  EXPECT_THROW(Reward::quadratic(Tensor::matrix(2, 2, {1, 2, 0, 1}), 1.0), DomainError);
  EXPECT_THROW(Reward::quadratic(Tensor::matrix(2, 3, {1, 2, 0, 1, 0, 0}), 1.0), ShapeError);
  EXPECT_THROW(Reward::redness(1.0).evaluate(Tensor::vector({1, 2})), ShapeError);
  EXPECT_THROW(Reward::linear(Tensor::vector({1, 2})).evaluate(Tensor::vector({1, 2, 3})), ShapeError);
  EXPECT_THROW(Reward::linear(Tensor::vector({1, std::nan("")})), DomainError);
}
