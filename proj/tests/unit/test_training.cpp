#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "hypernoise/errors.hpp"
#include "hypernoise/objectives.hpp"
#include "hypernoise/rng.hpp"
#include "hypernoise/training.hpp"

using namespace hypernoise;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const Generator> affine2() {
  GeneratorSpec s;
  s.kind = GeneratorKind::Affine;
  s.latent_dim = 2;
  s.affine_matrix = Tensor::matrix(2, 2, {1, 0.5, -0.3, 0.8});
  s.affine_bias = Tensor::vector({0.2, -0.1});
  return std::make_shared<const Generator>(make_generator(s, 0));
}

std::shared_ptr<const Generator> mlp(std::uint64_t seed = 1) {
  GeneratorSpec s;
  s.kind = GeneratorKind::Mlp;
  s.latent_dim = 3;
  s.output_dim = 4;
  s.hidden = {6};
  return std::make_shared<const Generator>(make_generator(s, seed));
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hn_training_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << s;
}

}  // namespace

TEST(Optimizer, SgdStep) {
  ParameterSet p{{"w", Tensor::vector({1.0, 2.0})}};
  Optimizer opt({OptimizerKind::Sgd, 0.1});
  opt.step(p, {{"w", Tensor::vector({1.0, -1.0})}});
  EXPECT_DOUBLE_EQ(p["w"][0], 0.9);
  EXPECT_DOUBLE_EQ(p["w"][1], 2.1);
}

TEST(Optimizer, SgdMomentumAccumulates) {
  OptimizerConfig cfg{OptimizerKind::Sgd, 0.1, 0.5};
  ParameterSet p{{"w", Tensor::vector({0.0})}};
  Optimizer opt(cfg);
  opt.step(p, {{"w", Tensor::vector({1.0})}});
  opt.step(p, {{"w", Tensor::vector({1.0})}});
  EXPECT_NEAR(p["w"][0], -0.1 - 0.15, 1e-15);
}

TEST(Optimizer, AdamFirstStepIsLearningRateTimesSign) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::Adam;
  cfg.learning_rate = 0.01;
  ParameterSet p{{"w", Tensor::vector({0.0, 0.0})}};
  Optimizer opt(cfg);
  opt.step(p, {{"w", Tensor::vector({3.0, -0.2})}});
  EXPECT_NEAR(p["w"][0], -0.01, 1e-8);
  EXPECT_NEAR(p["w"][1], 0.01, 1e-7);
}

TEST(Optimizer, InvalidConfig) {
  OptimizerConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(Optimizer{cfg}, ConfigError);
  EXPECT_THROW(optimizer_from_string("rmsprop"), ConfigError);
}

TEST(Training, ClipGlobalNorm) {
  ParameterSet g{{"a", Tensor::vector({3.0})}, {"b", Tensor::vector({4.0})}};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 2.0), global_norm(g));
}

TEST(Training, ZeroRewardStaysAtZero) {
  TrainConfig cfg;
  cfg.steps = 50;
  cfg.optimizer.learning_rate = 0.1;
  const auto res = train_hypernoise(mlp(), Reward::zero(4), cfg);
  EXPECT_EQ(res.status, TrainStatus::Completed);
  for (const auto& [name, t] : res.hn.parameters())
    if (name.ends_with(".up"))
      for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

TEST(Training, AffineLinearConvergesToShift) {
  // optimum f = A^T c / alpha (a constant)
  TrainConfig cfg;
  cfg.steps = 1500;
  cfg.batch_size = 64;
  cfg.optimizer.learning_rate = 0.05;
  cfg.seed = 3;
  const auto g = affine2();
  const Reward r = Reward::linear(Tensor::vector({0.6, -0.4}));
  const auto res = train_hypernoise(g, r, cfg);
  ASSERT_EQ(res.status, TrainStatus::Completed);
  Rng rng(1);
  const Tensor f = res.hn.perturbation_batch(rng.normal_matrix(200, 2));
  const double target[2] = {0.6 * 1 - 0.4 * -0.3, 0.6 * 0.5 - 0.4 * 0.8};
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(f(i, j), target[j], 0.02 * std::max(1.0, std::abs(target[j])));
}

TEST(Training, DeterministicGivenSeed) {
  TrainConfig cfg;
  cfg.steps = 30;
  cfg.seed = 9;
  const Reward r = Reward::quadratic(Tensor::identity(4), -1.0);
  const auto a = train_hypernoise(mlp(), r, cfg), b = train_hypernoise(mlp(), r, cfg);
  EXPECT_EQ(checksum(a.hn.parameters()), checksum(b.hn.parameters()));
  EXPECT_EQ(a.history.to_csv(), b.history.to_csv());
  cfg.seed = 10;
  EXPECT_NE(checksum(train_hypernoise(mlp(), r, cfg).hn.parameters()), checksum(a.hn.parameters()));
}

TEST(Training, HistoryLogsSchedule) {
  TrainConfig cfg;
  cfg.steps = 25;
  cfg.log_every = 10;
  std::vector<std::size_t> evals;
  TrainOptions opts;
  opts.eval_every = 10;
  opts.on_eval = [&](std::size_t s, const NoiseHypernetwork&) { evals.push_back(s); };
  const auto res = train_hypernoise(mlp(), Reward::linear(Tensor::vector({1, 0, 0, 0})), cfg, opts);
  std::vector<std::size_t> logged;
  for (const auto& row : res.history.rows) logged.push_back(row.step);
  EXPECT_EQ(logged, (std::vector<std::size_t>{1, 10, 20, 25}));
  EXPECT_EQ(evals, (std::vector<std::size_t>{10, 20, 25}));
  EXPECT_EQ(res.history.to_csv().substr(0, 71),
            "step,l2_term,reward_term,total_loss,grad_norm,lipschitz_audit,wall_time");
}

TEST(Training, DivergenceStopsWithLastFiniteParameters) {
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.optimizer.learning_rate = 1.0;
  cfg.grad_norm_clip = 1e300;
  cfg.l2_ceiling = 1e300;
  // convex upward reward: the optimum is at infinity and plain SGD blows up
  const auto res = train_hypernoise(affine2(), Reward::quadratic(Tensor::identity(2), 50.0), cfg);
  EXPECT_EQ(res.status, TrainStatus::NonFiniteLoss);
  EXPECT_LT(res.steps_completed, 500u);
  EXPECT_TRUE(all_finite(res.hn.parameters()));
  Rng rng(1);
  const auto check = hypernoise_loss(res.hn, res.hn.backbone(), Reward::quadratic(Tensor::identity(2), 50.0),
                                     rng.normal_matrix(4, 2), std::nullopt, 1.0);
  EXPECT_TRUE(std::isfinite(check.breakdown.total));
}

TEST(Training, RegularizationCeilingStopsRun) {
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.optimizer.learning_rate = 0.5;
  cfg.l2_ceiling = 0.05;
  const auto res = train_hypernoise(affine2(), Reward::linear(Tensor::vector({5, 5})), cfg);
  EXPECT_EQ(res.status, TrainStatus::RegularizationBreach);
  EXPECT_NE(res.message.find("exceeds ceiling"), std::string::npos);
}

TEST(Training, ConditionalGeneratorNeedsConditions) {
  GeneratorSpec s;
  s.kind = GeneratorKind::Mlp;
  s.latent_dim = 2;
  s.output_dim = 3;
  s.condition_dim = 1;
  s.hidden = {4};
  auto g = std::make_shared<const Generator>(make_generator(s, 1));
  TrainConfig cfg;
  cfg.steps = 5;
  EXPECT_THROW(train_hypernoise(g, Reward::zero(3), cfg), ConfigError);
  TrainOptions opts;
  opts.conditions = std::vector<Tensor>{Tensor::vector({0.0}), Tensor::vector({1.0})};
  EXPECT_EQ(train_hypernoise(g, Reward::zero(3), cfg, opts).status, TrainStatus::Completed);
}

TEST(Checkpoint, RoundTripIsExact) {
  const fs::path dir = temp_dir("roundtrip");
  auto g = mlp();
  TrainConfig cfg;
  cfg.steps = 20;
  cfg.checkpoint_path = dir / "hn.bin";
  const auto res = train_hypernoise(g, Reward::linear(Tensor::vector({1, 0, -1, 0})), cfg);
  const auto loaded = load_checkpoint(dir / "hn.bin", g);
  EXPECT_EQ(checksum(loaded.parameters()), checksum(res.hn.parameters()));
  EXPECT_EQ(loaded.rank(), res.hn.rank());
  EXPECT_EQ(loaded.lora_alpha(), res.hn.lora_alpha());
  EXPECT_FALSE(fs::exists(dir / "hn.bin.tmp"));
}

TEST(Checkpoint, CorruptionAndMismatchAreDetected) {
  const fs::path dir = temp_dir("corrupt");
  auto g = mlp();
  save_checkpoint(init_hypernet(g, 2, 4.0, 1), dir / "hn.bin");
  const std::string good = slurp(dir / "hn.bin");

  std::string flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  spit(dir / "flip.bin", flipped);
  EXPECT_THROW(load_checkpoint(dir / "flip.bin", g), CheckpointError);

  spit(dir / "short.bin", good.substr(0, good.size() - 20));
  EXPECT_THROW(load_checkpoint(dir / "short.bin", g), CheckpointError);

  spit(dir / "junk.bin", "not a checkpoint at all");
  EXPECT_THROW(load_checkpoint(dir / "junk.bin", g), CheckpointError);

  EXPECT_THROW(load_checkpoint(dir / "missing.bin", g), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "hn.bin", mlp(2)), CheckpointError);
}
