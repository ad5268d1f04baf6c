#include <gtest/gtest.h>

#include <cmath>

#include "hypernoise/baselines.hpp"
#include "hypernoise/errors.hpp"
#include "hypernoise/rng.hpp"

using namespace hypernoise;

namespace {

std::shared_ptr<const Generator> affine2() {
  GeneratorSpec s;
  s.kind = GeneratorKind::Affine;
  s.latent_dim = 2;
  s.affine_matrix = Tensor::matrix(2, 2, {1, 0.5, -0.3, 0.8});
  s.affine_bias = Tensor::vector({0.2, -0.1});
  return std::make_shared<const Generator>(make_generator(s, 0));
}

std::shared_ptr<const Generator> mlp() {
  GeneratorSpec s;
  s.kind = GeneratorKind::Mlp;
  s.latent_dim = 3;
  s.output_dim = 4;
  s.hidden = {6, 5};
  return std::make_shared<const Generator>(make_generator(s, 2));
}

}  // namespace

TEST(NoiseOpt, AffineLinearConvergesToClosedForm) {
  // argmax c.(A x + b) - lambda/2 |x|^2 = A^T c / lambda
  const auto g = affine2();
  const Reward r = Reward::linear(Tensor::vector({0.6, -0.4}));
  NoiseOptConfig cfg;
  cfg.steps = 300;
  cfg.learning_rate = 0.2;
  cfg.reg_weight = 2.0;
  const auto res = noise_opt(*g, r, Tensor::vector({3.0, -2.0}), cfg);
  const double target[2] = {(0.6 * 1 - 0.4 * -0.3) / 2.0, (0.6 * 0.5 - 0.4 * 0.8) / 2.0};
  EXPECT_NEAR(res.x0_star[0], target[0], 1e-8);
  EXPECT_NEAR(res.x0_star[1], target[1], 1e-8);
  EXPECT_EQ(res.rewards.size(), 300u);
  // the objective is concave, so gradient ascent with a small step never decreases it
  for (std::size_t i = 1; i < res.objectives.size(); ++i) EXPECT_GE(res.objectives[i], res.objectives[i - 1] - 1e-12);
}

TEST(NoiseOpt, BatchRowsAreIndependentProblems) {
  const auto g = mlp();
  const Reward r = Reward::quadratic(Tensor::identity(4), -1.0);
  NoiseOptConfig cfg;
  cfg.steps = 20;
  Rng rng(1);
  const Tensor x = rng.normal_matrix(3, 3);
  const auto batch = noise_opt_batch(*g, r, x, cfg);
  ASSERT_EQ(batch.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto one = noise_opt(*g, r, x.row_block(i, i + 1).reshaped(Shape{3}), cfg);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(batch[i].x0_star[j], one.x0_star[j], 1e-12);
  }
}

TEST(BestOfN, SmallerNSeesAPrefix) {
  const auto g = mlp();
  const Reward r = Reward::linear(Tensor::vector({1, -1, 0.5, 0}));
  const auto b16 = best_of_n(*g, r, 16, 5);
  const auto b4 = best_of_n(*g, r, 4, 5);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(b4.rewards[i], b16.rewards[i]);
  EXPECT_GE(b16.best_reward, b4.best_reward);
  EXPECT_EQ(b16.best_reward, *std::max_element(b16.rewards.begin(), b16.rewards.end()));
  EXPECT_EQ(b16.best_sample, g->generate(b16.best_noise));
  EXPECT_THROW(best_of_n(*g, r, 0, 5), DomainError);
}

TEST(AdaptedGenerator, ZeroInitEqualsBase) {
  const auto g = mlp();
  const AdaptedGenerator a(g, 2, 4.0, true, 3);
  Rng rng(1);
  const Tensor x = rng.normal_matrix(10, 3);
  EXPECT_EQ(a.generate_batch(x), g->generate_batch(x));
  EXPECT_EQ(a.drift(), 0.0);
}

TEST(AdaptedGenerator, MaterializeMatchesAdaptedForward) {
  const auto g = mlp();
  AdaptedGenerator a(g, 2, 4.0, true, 3);
  Rng rng(2);
  ParameterSet p = a.parameters();
  for (auto& [name, t] : p)
    for (auto& v : t.data()) v += 0.1 * rng.normal();
  a.set_parameters(p);
  const Generator m = a.materialize();
  const Tensor x = rng.normal_matrix(10, 3);
  for (std::size_t steps : {1u, 2u}) {
    const Tensor ya = a.generate_batch(x, std::nullopt, steps), ym = m.generate_batch(x, std::nullopt, steps);
    for (std::size_t i = 0; i < ya.size(); ++i) EXPECT_NEAR(ya[i], ym[i], 1e-12);
  }
  EXPECT_GT(a.drift(), 0.0);
}

TEST(AdaptedGenerator, InvalidSetups) {
  EXPECT_THROW(AdaptedGenerator(mlp(), 0, 4.0, false, 0), DomainError);
  EXPECT_THROW(AdaptedGenerator(mlp(), 6, 4.0, false, 0), DomainError);
}

TEST(DirectFinetune, BiasOnlyDriftGrowsLinearly) {
  // Gradient of -c.(A x + b + db) in db is the constant -c, so db moves by lr * c each step.
  const auto g = affine2();
  DirectFinetuneConfig cfg;
  cfg.steps = 200;
  cfg.rank = 0;
  cfg.adapt_bias = true;
  cfg.optimizer.learning_rate = 0.01;
  cfg.log_every = 1;
  const auto res = train_direct_finetune(g, Reward::linear(Tensor::vector({0.6, -0.4})), cfg);
  ASSERT_EQ(res.status, TrainStatus::Completed);
  const double per_step = 0.01 * std::sqrt(0.36 + 0.16);
  for (const auto& row : res.history) EXPECT_NEAR(row.drift, per_step * double(row.step), 1e-10);
  // and the reward grows linearly with no bound
  EXPECT_GT(res.history.back().reward_mean, res.history.front().reward_mean);
}

TEST(DirectFinetune, DeterministicAndIncreasesReward) {
  const auto g = mlp();
  DirectFinetuneConfig cfg;
  cfg.steps = 200;
  cfg.optimizer.learning_rate = 0.05;
  cfg.seed = 4;
  const Reward r = Reward::linear(Tensor::vector({1, 1, 1, 1}));
  const auto a = train_direct_finetune(g, r, cfg), b = train_direct_finetune(g, r, cfg);
  EXPECT_EQ(checksum(a.generator.parameters()), checksum(b.generator.parameters()));
  Rng rng(9);
  const Tensor x = rng.normal_matrix(2000, 3);
  double base = 0.0, tuned = 0.0;
  for (double v : r.evaluate_batch(g->generate_batch(x))) base += v;
  for (double v : r.evaluate_batch(a.generator.generate_batch(x))) tuned += v;
  EXPECT_GT(tuned, base);
}
