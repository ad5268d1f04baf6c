#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "hypernoise/errors.hpp"
#include "hypernoise/experiment.hpp"
#include "hypernoise/linalg.hpp"
#include "hypernoise/rng.hpp"

using namespace hypernoise;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_mlp(Method m) {
  return parse_config(std::string(R"([run]
method = )") + to_string(m) + R"(
seed = 5

[generator]
kind = mlp
latent_dim = 2
output_dim = 3
hidden = 6

[reward]
kind = linear
c = 1, -0.5, 0.25

[train]
steps = 40
batch_size = 16
learning_rate = 0.05
rank = 1
lora_alpha = 2

[baseline]
noise_opt_steps = 10
best_of_n = 4

[eval]
heldout = 200
reference = 200
eval_every = 20
multistep = 1, 2
)");
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::shared_ptr<const Generator> affine2() {
  GeneratorSpec s;
  s.kind = GeneratorKind::Affine;
  s.latent_dim = 2;
  s.affine_matrix = Tensor::matrix(2, 2, {1, 0.5, -0.3, 0.8});
  s.affine_bias = Tensor::vector({0.2, -0.1});
  return std::make_shared<const Generator>(make_generator(s, 0));
}

}  // namespace

TEST(Tradeoff, FidelityAtRewardInterpolatesFirstCrossing) {
  const std::vector<CurvePoint> c{{0, 0.0, 0.0}, {10, 1.0, 2.0}, {20, 0.5, 5.0}, {30, 2.0, 6.0}};
  EXPECT_DOUBLE_EQ(*fidelity_at_reward(c, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(*fidelity_at_reward(c, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(*fidelity_at_reward(c, 1.5), 5.0 + (1.0 / 1.5) * 1.0);
  EXPECT_DOUBLE_EQ(*fidelity_at_reward(c, -1.0), 0.0);
  EXPECT_FALSE(fidelity_at_reward(c, 2.5));
}

TEST(Tradeoff, MatchedLevelsCoverUpperHalfOfOverlap) {
  const std::vector<CurvePoint> h{{0, 0.0, 0.0}, {10, 1.0, 0.1}};
  const std::vector<CurvePoint> d{{0, 0.0, 0.0}, {10, 2.0, 4.0}};
  const auto m = matched_reward_levels(h, d);
  ASSERT_EQ(m.size(), kMatchedLevels);
  EXPECT_DOUBLE_EQ(m.front().level, 0.5);
  EXPECT_DOUBLE_EQ(m.back().level, 1.0);
  for (const auto& l : m) {
    EXPECT_NEAR(l.hypernoise_fidelity, 0.1 * l.level, 1e-15);
    EXPECT_NEAR(l.direct_fidelity, 2.0 * l.level, 1e-15);
  }
}

TEST(Tradeoff, DegenerateRangeGivesNoLevels) {
  const std::vector<CurvePoint> flat{{0, 0.3, 0.0}, {10, 0.3, 0.0}};
  const std::vector<CurvePoint> d{{0, 0.3, 0.0}, {10, 2.0, 4.0}};
  EXPECT_TRUE(matched_reward_levels(flat, d).empty());
  EXPECT_TRUE(matched_reward_levels({}, d).empty());
}

TEST(Tradeoff, SharedFieldMismatchNamesTheField) {
  const auto h = small_mlp(Method::Hypernoise);
  auto d = small_mlp(Method::DirectFt);
  EXPECT_NO_THROW(check_shared_fields(h, d));
  auto bad = d;
  bad.generator.hidden = {7};
  try {
    check_shared_fields(h, bad);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("[generator] hidden"), std::string::npos) << e.what();
  }
  bad = d;
  bad.train.steps = 41;
  EXPECT_THROW(check_shared_fields(h, bad), ConfigError);
  bad = d;
  set_seed(bad, 6);
  EXPECT_THROW(check_shared_fields(h, bad), ConfigError);
  bad = d;
  bad.eval.heldout = 300;
  EXPECT_THROW(check_shared_fields(h, bad), ConfigError);
  EXPECT_THROW(check_shared_fields(d, h), ConfigError);
}

TEST(Pipeline, ZeroRewardLeavesBaseUntouched) {
  auto cfg = small_mlp(Method::Hypernoise);
  cfg.reward = RewardConfig{};
  const auto res = run_pipeline(cfg);
  ASSERT_FALSE(res.failed) << res.message;
  const auto& base = res.report.rows.front();
  for (const auto& row : res.report.rows) {
    EXPECT_EQ(row.reward_mean, 0.0);
    EXPECT_EQ(row.fidelity, base.fidelity);
    EXPECT_EQ(row.diversity_mean_pairwise, base.diversity_mean_pairwise);
  }
  // the reward never moves, so the trade-off curve is a single point
  EXPECT_TRUE(matched_reward_levels(curve_of(res.report, "hypernoise"), curve_of(res.report, "hypernoise")).empty());
}

TEST(Pipeline, EveryMethodProducesRows) {
  for (Method m : {Method::Hypernoise, Method::DirectFt, Method::NoiseOpt, Method::BestOfN}) {
    const auto res = run_pipeline(small_mlp(m));
    ASSERT_FALSE(res.failed) << to_string(m) << ": " << res.message;
    EXPECT_EQ(res.report.rows.front().method, "base");
    EXPECT_GE(res.report.rows.size(), 2u);
    EXPECT_EQ(res.multistep.size(), 4u);  // base and method at steps 1 and 2
    EXPECT_FALSE(res.history_csv.empty());
  }
  const auto bon = run_pipeline(small_mlp(Method::BestOfN));
  std::vector<std::size_t> steps;
  for (const auto& r : bon.report.rows)
    if (r.method == "best_of_n") steps.push_back(r.step);
  EXPECT_EQ(steps, (std::vector<std::size_t>{1, 2, 4}));
}

TEST(Pipeline, ReportIsByteIdenticalAcrossRuns) {
  const fs::path a = fs::temp_directory_path() / "hn_exp_det_a", b = fs::temp_directory_path() / "hn_exp_det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto cfg = small_mlp(Method::Hypernoise);
  run_experiment(cfg, a);
  run_experiment(cfg, b);
  EXPECT_EQ(slurp(a / "report.csv"), slurp(b / "report.csv"));
  EXPECT_EQ(slurp(a / "kl.csv"), slurp(b / "kl.csv"));
  for (const char* f : {"resolved_config.ini", "history.csv", "multistep.csv", "checkpoint.bin", "plots/reward.svg",
                        "plots/fidelity.svg", "plots/loss.svg"})
    EXPECT_TRUE(fs::exists(a / f)) << f;
  EXPECT_FALSE(fs::exists(a / "FAILED"));
}

TEST(Pipeline, FailureKeepsRowsAndWritesMarker) {
  auto cfg = small_mlp(Method::Hypernoise);
  cfg.train.l2_ceiling = 1e-6;
  cfg.train.optimizer.learning_rate = 1.0;
  const fs::path out = fs::temp_directory_path() / "hn_exp_fail";
  fs::remove_all(out);
  const auto res = run_experiment(cfg, out);
  EXPECT_TRUE(res.failed);
  EXPECT_TRUE(fs::exists(out / "FAILED"));
  EXPECT_TRUE(fs::exists(out / "report.csv"));
  EXPECT_GE(res.report.rows.size(), 1u);
}

TEST(Laws, AffineModulatedLawMatchesSamples) {
  const auto g = affine2();
  auto hn = init_hypernet(g, 2, 2.0, 0);
  hn.set_adapter("head", Tensor::matrix(2, 3, {0.2, -0.1, 0.4, 0.05, 0.3, -0.2}), Tensor::identity(2));
  const auto law = affine_output_law(hn, *g);
  Rng rng(3);
  const Tensor x = rng.normal_matrix(200000, 2);
  const auto [mean, cov] = sample_moments(g->generate_batch(hn.modulate(x).xhat));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(mean[i], law.mean[i], 0.01);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(cov(i, j), law.covariance(i, j), 0.02);
  }
}

TEST(Diversity, ZeroInitMatchesBaseExactly) {
  GeneratorSpec s;
  s.kind = GeneratorKind::ImageDecoder;
  s.latent_dim = 2;
  s.image_height = 2;
  s.image_width = 2;
  s.hidden = {8};
  auto g = std::make_shared<const Generator>(make_generator(s, 1));
  const auto hn = init_hypernet(g, 2, 4.0, 0);
  const auto rows = diversity_analysis(hn, *g, {}, 5, 16, 9);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].label, "base");
  EXPECT_EQ(rows[0].value, rows[1].value);
  EXPECT_EQ(rows[0].error, rows[1].error);
  EXPECT_EQ(rows[0].n_pairs, 5u * 120u);
}

TEST(Diversity, ConstantShiftThroughAffineKeepsDistances) {
  const auto g = affine2();
  auto hn = init_hypernet(g, 2, 2.0, 0);
  hn.set_adapter("head", Tensor::matrix(2, 3, {0, 0, 1.5, 0, 0, -0.7}), Tensor::identity(2));
  const auto rows = diversity_analysis(hn, *g, {}, 4, 32, 2);
  EXPECT_NEAR(rows[0].value, rows[1].value, 1e-12);
  const std::string csv = diversity_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "condition,label,value,error,n_pairs");
}

TEST(Diversity, ConditionsGetTheirOwnRows) {
  GeneratorSpec s;
  s.kind = GeneratorKind::Mlp;
  s.latent_dim = 2;
  s.output_dim = 3;
  s.condition_dim = 1;
  s.hidden = {4};
  auto g = std::make_shared<const Generator>(make_generator(s, 1));
  const auto hn = init_hypernet(g, 1, 1.0, 0);
  const auto rows = diversity_analysis(hn, *g, {Tensor::vector({0.0}), Tensor::vector({1.0})}, 3, 8, 1);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].condition, "c0");
  EXPECT_EQ(rows[3].condition, "c1");
}
