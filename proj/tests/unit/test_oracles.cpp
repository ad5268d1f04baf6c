#include <gtest/gtest.h>

#include <cmath>

#include "hypernoise/errors.hpp"
#include "hypernoise/linalg.hpp"
#include "hypernoise/oracles.hpp"
#include "hypernoise/rng.hpp"

using namespace hypernoise;

namespace {

std::shared_ptr<const Generator> affine(Tensor a, Tensor b) {
  GeneratorSpec s;
  s.kind = GeneratorKind::Affine;
  s.latent_dim = a.cols();
  s.affine_matrix = std::move(a);
  s.affine_bias = std::move(b);
  return std::make_shared<const Generator>(make_generator(s, 0));
}

std::shared_ptr<const Generator> decoder(std::uint64_t seed) {
  GeneratorSpec s;
  s.kind = GeneratorKind::ImageDecoder;
  s.latent_dim = 2;
  s.image_height = 2;
  s.image_width = 2;
  s.hidden = {8};
  return std::make_shared<const Generator>(make_generator(s, seed));
}

}  // namespace

TEST(Oracles, TiltedNoiseForAffineLinearIsShiftedGaussian) {
  // p0 * exp(c . (A x + b) / alpha) is N(A^T c / alpha, I).
  const auto g = affine(Tensor::matrix(2, 2, {1, 0.5, -0.3, 0.8}), Tensor::vector({0.2, -0.1}));
  const Reward r = Reward::linear(Tensor::vector({0.6, -0.4}));
  const auto t = sample_tilted_noise(*g, r, 2.0, 50000, 1);
  EXPECT_EQ(t.method, TiltMethod::Snis);  // unbounded outputs
  const double mu[2] = {(0.6 * 1 - 0.4 * -0.3) / 2.0, (0.6 * 0.5 - 0.4 * 0.8) / 2.0};
  for (std::size_t j = 0; j < 2; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < 50000; ++i) m += t.weights[i] * t.samples(i, j);
    EXPECT_NEAR(m, mu[j], 0.02);
  }
  EXPECT_THROW(sample_tilted_noise(*g, r, 1.0, 10, 1, TiltMethod::Rejection), DomainError);
}

TEST(Oracles, RejectionAndSnisAgreeOnDecoder) {
  const auto g = decoder(3);
  const Reward r = Reward::redness(5.0);
  const auto rej = sample_tilted_noise(*g, r, 1.0, 20000, 2, TiltMethod::Rejection);
  const auto snis = sample_tilted_noise(*g, r, 1.0, 20000, 3, TiltMethod::Snis);
  EXPECT_EQ(rej.envelope_violations, 0u);
  EXPECT_GT(rej.acceptance_rate, 0.0);
  double ra = 0.0, rb = 0.0;
  const auto rwa = r.evaluate_batch(g->generate_batch(rej.samples));
  const auto rwb = r.evaluate_batch(g->generate_batch(snis.samples));
  for (std::size_t i = 0; i < 20000; ++i) {
    ra += rwa[i] / 20000.0;
    rb += snis.weights[i] * rwb[i];
  }
  EXPECT_NEAR(ra, rb, 0.03);
}

TEST(Oracles, PushforwardRoutesAgree) {
  const auto g = decoder(4);
  const auto rep = pushforward_check(*g, Reward::redness(5.0), 1.0, 20000, 5);
  EXPECT_FALSE(rep.inconclusive);
  EXPECT_EQ(rep.failures(), 0u);
  EXPECT_LE(rep.max_gap_in_se(), 4.0);
}

TEST(Oracles, PushforwardAffineAnalyticGaps) {
  const auto g = affine(Tensor::matrix(2, 2, {1, 0.5, -0.3, 0.8}), Tensor::vector({0.2, -0.1}));
  const auto rep = pushforward_check(*g, Reward::linear(Tensor::vector({0.6, -0.4})), 1.0, 20000, 6);
  ASSERT_EQ(rep.analytic_gaps.size(), 8u);
  for (const auto& gap : rep.analytic_gaps) EXPECT_TRUE(gap.within()) << gap.name << " " << gap.gap << " " << gap.se;
}

TEST(Oracles, SteinHoldsForKnownField) {
  // f(x) = tanh(x) componentwise: E[x tanh x] = E[1 - tanh^2 x]
  const auto f = [](const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data()) v = std::tanh(v);
    return y;
  };
  const auto s = stein_check(f, 3, 50000, 1);
  EXPECT_TRUE(s.within());
  EXPECT_GT(s.lhs, 0.5);
}

TEST(Oracles, SteinDetectsAWrongTrace) {
  // A field whose FD trace is computed on a different map than its value.
  const auto f = [](const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data()) v = v + 0.5;
    return y;
  };
  // E[x . (x + 0.5)] = d = Tr I, so this one holds ...
  EXPECT_TRUE(stein_check(f, 2, 20000, 2).within());
  // ... and a seeded mismatch is caught
  auto s = stein_check(f, 2, 20000, 2);
  s.rhs += 0.2;
  EXPECT_FALSE(s.within());
}

TEST(Oracles, KnnKlMatchesGaussianClosedForm) {
  Rng rng(7);
  const std::size_t n = 4000, d = 2;
  Tensor p = rng.normal_matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) p(i, 0) += 1.0;
  const Tensor q = rng.normal_matrix(n, d);
  // KL(N(e1, I) || N(0, I)) = 0.5
  EXPECT_NEAR(kl_knn(p, q, 5), 0.5, 0.08);
  const Tensor q2 = rng.normal_matrix(n, d);
  EXPECT_NEAR(kl_knn(q2, q, 5), 0.0, 0.05);
}

TEST(Oracles, KnnKlDuplicatesAreJitteredOnce) {
  Tensor p = Tensor::zeros(10, 1);
  for (std::size_t i = 0; i < 10; ++i) p(i, 0) = double(i / 2);  // pairs of duplicates
  const Tensor q = Tensor::matrix(10, 1, {0.1, 1.1, 2.1, 3.1, 4.1, 0.3, 1.3, 2.3, 3.3, 4.3});
  EXPECT_TRUE(std::isfinite(kl_knn(p, q, 1)));
  EXPECT_THROW(kl_knn(p, q, 0), DomainError);
  EXPECT_THROW(kl_knn(p.row_block(0, 3), q, 5), DomainError);
}

TEST(Oracles, DpiClosedFormForAffine) {
  const auto g = affine(Tensor::matrix(1, 2, {1.0, 0.0}), Tensor::vector({0.0}));
  auto hn = init_hypernet(g, 1, 1.0, 0);
  // f(x) = (0, 0) x + (c1, c2): only the first coordinate survives the projection.
  hn.set_adapter("head", Tensor::matrix(1, 3, {0, 0, 1}), Tensor::matrix(2, 1, {0.3, 0.7}));
  const auto res = dpi_check(hn, *g, 100, 1);
  EXPECT_EQ(res.method, KlMethod::ClosedForm);
  EXPECT_NEAR(res.kl_noise, 0.5 * (0.09 + 0.49), 1e-12);
  EXPECT_NEAR(res.kl_output, 0.5 * 0.09, 1e-12);
  EXPECT_NEAR(res.margin, 0.5 * 0.49, 1e-12);
}

TEST(Oracles, DpiKnnMarginOnDecoder) {
  const auto g = decoder(5);
  auto hn = init_hypernet(g, 2, 4.0, 1);
  randomize_with_lipschitz_budget(hn, 0.5, 2);
  const auto res = dpi_check(hn, *g, 2000, 3);
  EXPECT_EQ(res.method, KlMethod::Knn);
  EXPECT_GE(res.margin, -0.05);
}

TEST(Oracles, BilipschitzInterval) {
  const auto g = decoder(6);
  for (double budget : {0.1, 0.5, 0.9}) {
    auto hn = init_hypernet(g, 2, 4.0, 1);
    randomize_with_lipschitz_budget(hn, budget, 4);
    const auto b = bilipschitz_check(hn, 500, 1);
    EXPECT_TRUE(b.within()) << budget << ": " << b.min_ratio << " " << b.max_ratio;
  }
}

TEST(Oracles, TheoryReportCsv) {
  TheoryReport rep;
  rep.add_abs("a", 0.5, 1.0);
  rep.add_abs("b", std::nan(""), 1.0);
  EXPECT_FALSE(rep.all_pass());
  EXPECT_EQ(rep.checks[0].status, CheckStatus::Pass);
  EXPECT_EQ(rep.checks[1].status, CheckStatus::Fail);
  EXPECT_EQ(rep.to_csv().substr(0, 33), "check,statistic,tolerance,status\n");
}
