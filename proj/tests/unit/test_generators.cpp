#include <gtest/gtest.h>

#include <cmath>

#include "hypernoise/errors.hpp"
#include "hypernoise/generators.hpp"
#include "hypernoise/linalg.hpp"
#include "hypernoise/rng.hpp"

using namespace hypernoise;

namespace {

GeneratorSpec mlp_spec(std::size_t cond = 0) {
  GeneratorSpec s;
  s.kind = GeneratorKind::Mlp;
  s.latent_dim = 3;
  s.output_dim = 4;
  s.condition_dim = cond;
  s.hidden = {6, 5};
  return s;
}

GeneratorSpec decoder_spec() {
  GeneratorSpec s;
  s.kind = GeneratorKind::ImageDecoder;
  s.latent_dim = 2;
  s.image_height = 4;
  s.image_width = 4;
  s.hidden = {16};
  return s;
}

}  // namespace

TEST(Generators, SameSeedSameWeights) {
  const Generator a = make_generator(mlp_spec(), 5), b = make_generator(mlp_spec(), 5);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_NE(a.fingerprint(), make_generator(mlp_spec(), 6).fingerprint());
}

TEST(Generators, AffineUsesGivenMatrix) {
  GeneratorSpec s;
  s.kind = GeneratorKind::Affine;
  s.latent_dim = 2;
  s.affine_matrix = Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1});
  s.affine_bias = Tensor::vector({0.5, 0, -1});
  const Generator g = make_generator(s, 0);
  EXPECT_EQ(g.output_dim(), 3u);
  const Tensor y = g.generate(Tensor::vector({2, 3}));
  EXPECT_EQ(y.values(), (std::vector<double>{2.5, 3, 4}));
  EXPECT_FALSE(g.output_box());
}

TEST(Generators, DecoderOutputsArePixelsInUnitBox) {
  const Generator g = make_generator(decoder_spec(), 1);
  EXPECT_EQ(g.output_dim(), 48u);
  Rng rng(2);
  const Tensor y = g.generate_batch(rng.normal_matrix(100, 2, 3.0));
  for (double v : y.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  ASSERT_TRUE(g.output_box());
  EXPECT_EQ(g.output_box()->second, 1.0);
}

TEST(Generators, GraphMatchesDirectEvaluation) {
  for (std::size_t steps : {1u, 3u}) {
    const Generator g = make_generator(mlp_spec(2), 9);
    Rng rng(3);
    const Tensor x = rng.normal_matrix(7, 3), c = rng.normal_matrix(7, 2);
    Graph graph;
    NodeId xn = graph.input("x"), cn = graph.input("c");
    graph.set_root(g.build(graph, xn, cn, steps));
    const Tensor via_graph = graph.forward({{"x", x}, {"c", c}});
    const Tensor direct = g.generate_batch(x, c, steps);
    for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(via_graph[i], direct[i], 1e-12);
  }
}

TEST(Generators, BatchRowsMatchSingleSamples) {
  const Generator g = make_generator(mlp_spec(), 4);
  Rng rng(1);
  const Tensor x = rng.normal_matrix(5, 3);
  const Tensor batch = g.generate_batch(x);
  for (std::size_t i = 0; i < 5; ++i) {
    const Tensor one = g.generate(x.row_block(i, i + 1).reshaped(Shape{3}));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(one[j], batch(i, j));
  }
}

TEST(Generators, InputGradientMatchesFd) {
  const Generator g = make_generator(mlp_spec(), 8);
  const Tensor x = Tensor::vector({0.3, -1.1, 0.7});
  const Tensor w = Tensor::vector({1.0, -2.0, 0.5, 0.25});
  Graph graph;
  NodeId xn = graph.input("x");
  graph.set_root(graph.sum(graph.mul(g.build(graph, xn), graph.constant(w))));
  graph.forward({{"x", x}});
  const Tensor ad = graph.backward().at("x");
  const Tensor fd = linalg::gradient_fd([&](const Tensor& v) { return linalg::dot(g.generate(v), w); }, x);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(ad[i], fd[i], 1e-8);
}

TEST(Generators, ShapeErrors) {
  const Generator g = make_generator(mlp_spec(), 1);
  EXPECT_THROW(g.generate(Tensor::vector({1, 2})), ShapeError);
  EXPECT_THROW(g.generate(Tensor::vector({1, 2, 3}), Tensor::vector({1})), ShapeError);
  const Generator gc = make_generator(mlp_spec(2), 1);
  EXPECT_THROW(gc.generate(Tensor::vector({1, 2, 3})), ShapeError);
  EXPECT_THROW(g.generate(Tensor::vector({1, 2, 3}), std::nullopt, 0), DomainError);
}

TEST(Generators, InvalidSpecsAreConfigErrors) {
  GeneratorSpec s = decoder_spec();
  s.image_width = 0;
  EXPECT_THROW(make_generator(s, 0), ConfigError);
  GeneratorSpec a;
  a.kind = GeneratorKind::Affine;
  a.latent_dim = 3;
  a.affine_matrix = Tensor::matrix(2, 2, {1, 0, 0, 1});
  EXPECT_THROW(make_generator(a, 0), ConfigError);
}

TEST(Generators, SampleMomentsOfAffineMatchLaw) {
  GeneratorSpec s;
  s.kind = GeneratorKind::Affine;
  s.latent_dim = 2;
  s.affine_matrix = Tensor::matrix(2, 2, {1, 0.5, -0.3, 0.8});
  s.affine_bias = Tensor::vector({0.2, -0.1});
  const Generator g = make_generator(s, 0);
  const auto ref = base_output_reference(g, 200000, 4);
  const Tensor a = *s.affine_matrix;
  const Tensor cov = linalg::matmul(a, linalg::transpose(a));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(ref.mean[i], (*s.affine_bias)[i], 0.01);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(ref.covariance(i, j), cov(i, j), 0.02);
  }
}

TEST(Generators, MultiStepScheduleFollowsBlendRule) {
  const Generator g = make_generator(mlp_spec(), 2);
  const Tensor x = Tensor::vector({0.5, -0.5, 1.0});
  const Tensor u1 = g.generate(x, std::nullopt, 1);
  const Tensor u2 = g.generate(x, std::nullopt, 2);
  Tensor shrunk = x;
  for (std::size_t i = 0; i < 3; ++i) shrunk[i] = x[i] / 1.5;
  const Tensor fresh = g.generate(shrunk);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(u2[i], 0.5 * u1[i] + 0.5 * fresh[i], 1e-12);
}
