#include "hypernoise/theory.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "hypernoise/errors.hpp"
#include "hypernoise/linalg.hpp"
#include "hypernoise/objectives.hpp"
#include "hypernoise/rng.hpp"

namespace hypernoise {

void TheoryConfig::validate() const {
  if (latent_dim == 0 || latent_dim > kMaxJacobianDim) throw ConfigError("latent_dim: must lie in [1, 64]");
  if (networks == 0) throw ConfigError("networks: must be >= 1");
  if (lipschitz_budgets.empty()) throw ConfigError("lipschitz_budgets: needs at least one value");
  for (double l : lipschitz_budgets)
    if (!(l > 0.0 && l < 1.0)) throw ConfigError("lipschitz_budgets: values must lie in (0, 1)");
  if (points_per_network == 0) throw ConfigError("points_per_network: must be >= 1");
  if (stein_dims.empty()) throw ConfigError("stein_dims: needs at least one dimension");
  for (auto d : stein_dims)
    if (d == 0 || d > kMaxJacobianDim) throw ConfigError("stein_dims: dimensions must lie in [1, 64]");
  if (stein_networks == 0) throw ConfigError("stein_networks: must be >= 1");
  if (stein_samples < 100) throw ConfigError("stein_samples: must be >= 100");
  if (pushforward_samples < 1000) throw ConfigError("pushforward_samples: must be >= 1000");
  if (knn_k == 0) throw ConfigError("knn_k: must be >= 1");
  if (dpi_samples <= knn_k) throw ConfigError("dpi_samples: must exceed knn_k");
  if (gradient_points == 0) throw ConfigError("gradient_points: must be >= 1");
}

namespace {

std::shared_ptr<const Generator> small_mlp(std::size_t d, std::size_t out, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Mlp;
  spec.latent_dim = d;
  spec.output_dim = out;
  spec.hidden = {8};
  spec.activation = Activation::Tanh;
  return std::make_shared<const Generator>(make_generator(spec, seed));
}

NoiseHypernetwork budget_network(std::size_t d, double budget, std::uint64_t seed) {
  auto backbone = small_mlp(d, d, derive_seed(seed, "backbone"));
  auto hn = init_hypernet(backbone, 2, 4.0, derive_seed(seed, "init"));
  randomize_with_lipschitz_budget(hn, budget, derive_seed(seed, "budget"));
  return hn;
}

// f(x0) = c for every x0: the head reads only its constant column.
NoiseHypernetwork constant_shift(std::shared_ptr<const Generator> backbone, const Tensor& c) {
  auto hn = init_hypernet(backbone, 1, 1.0, 0);
  const auto& head = hn.adapters().back();
  Tensor down = Tensor::zeros(1, head.down_cols());
  down(0, head.down_cols() - 1) = 1.0;
  Tensor up = Tensor::zeros(head.out_dim, 1);
  for (std::size_t i = 0; i < c.size(); ++i) up(i, 0) = c[i] / hn.scale();
  hn.set_adapter(head.name, down, up);
  return hn;
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0}); }

double loss_gradient_error(std::size_t points, std::uint64_t seed) {
  const std::size_t d = 3;
  auto g = small_mlp(d, 2, derive_seed(seed, "grad-generator"));
  Reward r = Reward::quadratic(Tensor::matrix(2, 2, {1.0, 0.3, 0.3, 0.5}), -1.0);
  double worst = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    const auto s = derive_seed(seed, p);
    auto hn = init_hypernet(g, 2, 2.0, derive_seed(s, "init"));
    Rng rng(derive_seed(s, "params"));
    ParameterSet params = hn.parameters();
    for (auto& [name, t] : params)
      for (auto& v : t.data()) v = 0.3 * rng.normal();
    hn.set_parameters(params);
    const Tensor noise = rng.normal_matrix(4, d);
    const auto res = hypernoise_loss(hn, *g, r, noise, std::nullopt, 0.7);
    const double eps = 1e-5;
    for (auto& [name, t] : params) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double keep = t[i];
        t[i] = keep + eps;
        hn.set_parameters(params);
        const double up = hypernoise_loss(hn, *g, r, noise, std::nullopt, 0.7).breakdown.total;
        t[i] = keep - eps;
        hn.set_parameters(params);
        const double down = hypernoise_loss(hn, *g, r, noise, std::nullopt, 0.7).breakdown.total;
        t[i] = keep;
        worst = std::max(worst, relative_gap(res.gradients.at(name)[i], (up - down) / (2.0 * eps)));
      }
    }
  }
  return worst;
}

}  // namespace

TheoryReport run_theory_suite(const TheoryConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TheoryReport report;
  const std::size_t d = cfg.latent_dim;

  report.add_abs("loss_gradient_vs_fd", loss_gradient_error(cfg.gradient_points, derive_seed(seed, "gradients")), 1e-5);

  // log-det error bound and KL approximation on budgeted networks
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  double worst_small_l = 0.0;
  for (std::size_t k = 0; k < cfg.networks; ++k) {
    const double budget = cfg.lipschitz_budgets[k % cfg.lipschitz_budgets.size()];
    const auto s = derive_seed(derive_seed(seed, "bound"), k);
    const auto hn = budget_network(d, budget, s);
    const Tensor x = Rng(derive_seed(s, "points")).normal_matrix(cfg.points_per_network, d);
    const auto kl = exact_noise_kl(hn, x);
    const double bound = theorem_bound(d, kl.lipschitz_used);
    for (const auto& j : hypernet_jacobians(hn, x))
      if (std::abs(error_term(j)) > bound) ++violations;
    worst_ratio = std::max(worst_ratio, std::abs(kl.approx_error) / bound);
    if (kl.lipschitz_used <= 0.1)
      worst_small_l = std::max(worst_small_l, bound / (0.5 * d * kl.lipschitz_used * kl.lipschitz_used));
  }
  report.add("bound_violations", double(violations), 0.0, violations == 0 ? CheckStatus::Pass : CheckStatus::Fail);
  report.add("kl_approx_gap_over_bound", worst_ratio, 1.0, worst_ratio <= 1.0 ? CheckStatus::Pass : CheckStatus::Fail);
  if (worst_small_l > 0.0)
    report.add("small_budget_bound_over_quadratic", worst_small_l, 1.1,
               worst_small_l <= 1.1 ? CheckStatus::Pass : CheckStatus::Fail);

  {
    Tensor c(Shape{d});
    Rng rng(derive_seed(seed, "shift"));
    for (auto& v : c.data()) v = rng.normal();
    const auto hn = constant_shift(small_mlp(d, d, derive_seed(seed, "shift-backbone")), c);
    const auto kl = exact_noise_kl(hn, rng.normal_matrix(64, d));
    const double closed = 0.5 * linalg::dot(c, c);
    report.add_abs("constant_shift_exact_kl", kl.exact_kl - closed, 1e-10);
    report.add_abs("constant_shift_l2", kl.l2_term - closed, 1e-10);
  }

  {
    double worst = 0.0;
    std::size_t idx = 0;
    for (auto sd : cfg.stein_dims) {
      for (std::size_t k = 0; k < cfg.stein_networks; ++k, ++idx) {
        const auto s = derive_seed(derive_seed(seed, "stein"), idx);
        const auto hn = budget_network(sd, cfg.lipschitz_budgets[k % cfg.lipschitz_budgets.size()], s);
        const auto res = stein_check(hn, cfg.stein_samples, derive_seed(s, "draws"));
        worst = std::max(worst, std::abs(res.lhs - res.rhs) / res.se);
      }
    }
    report.add("stein_max_gap_in_se", worst, 4.0, worst <= 4.0 ? CheckStatus::Pass : CheckStatus::Fail);
  }

  auto pushforward_row = [&](const std::string& name, const Generator& g, const Reward& r, double alpha) {
    const auto rep = pushforward_check(g, r, alpha, cfg.pushforward_samples, derive_seed(seed, name));
    const double worst = rep.max_gap_in_se();
    CheckStatus st = worst <= 4.0 ? CheckStatus::Pass : CheckStatus::Fail;
    if (rep.inconclusive) st = CheckStatus::Inconclusive;
    report.add(name, worst, 4.0, st);
  };
  {
    GeneratorSpec spec;
    spec.kind = GeneratorKind::Affine;
    spec.latent_dim = 2;
    spec.affine_matrix = Tensor::matrix(2, 2, {1.0, 0.5, -0.3, 0.8});
    spec.affine_bias = Tensor::vector({0.2, -0.1});
    spec.output_dim = 2;
    const auto affine = make_generator(spec, 0);
    pushforward_row("pushforward_affine_linear_max_gap_in_se", affine, Reward::linear(Tensor::vector({0.6, -0.4})),
                    1.0);
    pushforward_row("pushforward_mlp_quadratic_max_gap_in_se", *small_mlp(2, 2, derive_seed(seed, "pf-mlp")),
                    Reward::quadratic(Tensor::identity(2), -1.0), 1.0);

    GeneratorSpec dec;
    dec.kind = GeneratorKind::ImageDecoder;
    dec.latent_dim = 2;
    dec.image_height = 4;
    dec.image_width = 4;
    dec.output_dim = 48;
    dec.hidden = {32};
    pushforward_row("pushforward_decoder_redness_max_gap_in_se", make_generator(dec, derive_seed(seed, "pf-decoder")),
                    Reward::redness(10.0), 1.0);
  }

  {
    // projection onto the first coordinate keeps exactly the first component of the shift
    GeneratorSpec spec;
    spec.kind = GeneratorKind::Affine;
    spec.latent_dim = d;
    Tensor proj = Tensor::zeros(1, d);
    proj(0, 0) = 1.0;
    spec.affine_matrix = proj;
    spec.affine_bias = Tensor::vector({0.0});
    spec.output_dim = 1;
    auto g = std::make_shared<const Generator>(make_generator(spec, 0));
    Tensor c(Shape{d});
    Rng rng(derive_seed(seed, "dpi-shift"));
    for (auto& v : c.data()) v = 0.5 * rng.normal();
    double expected = 0.0;
    for (std::size_t i = 1; i < d; ++i) expected += 0.5 * c[i] * c[i];
    const auto res = dpi_check(constant_shift(g, c), *g, cfg.dpi_samples, derive_seed(seed, "dpi-closed"), cfg.knn_k);
    report.add_abs("dpi_projection_margin_error", res.margin - expected, 1e-9);
    report.add("dpi_closed_form_margin", res.margin, 0.0, res.margin >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail);
  }
  {
    auto g = small_mlp(2, 3, derive_seed(seed, "dpi-mlp"));
    auto hn = init_hypernet(g, 2, 4.0, derive_seed(seed, "dpi-hn"));
    randomize_with_lipschitz_budget(hn, 0.5, derive_seed(seed, "dpi-budget"));
    const auto res = dpi_check(hn, *g, cfg.dpi_samples, derive_seed(seed, "dpi-knn"), cfg.knn_k);
    report.add("dpi_knn_margin", res.margin, -0.05, res.margin >= -0.05 ? CheckStatus::Pass : CheckStatus::Fail);
  }

  {
    std::size_t bad = 0;
    for (std::size_t k = 0; k < cfg.networks; ++k) {
      const auto s = derive_seed(derive_seed(seed, "bilipschitz"), k);
      const auto hn = budget_network(d, cfg.lipschitz_budgets[k % cfg.lipschitz_budgets.size()], s);
      if (!bilipschitz_check(hn, 500, derive_seed(s, "pairs")).within()) ++bad;
    }
    report.add("bilipschitz_violations", double(bad), 0.0, bad == 0 ? CheckStatus::Pass : CheckStatus::Fail);
  }

  {
    // KL(N(m, I) || N(0, I)) = |m|^2 / 2 = 0.5
    Rng rng(derive_seed(seed, "knn"));
    Tensor p = rng.normal_matrix(cfg.dpi_samples, 2);
    for (std::size_t i = 0; i < p.rows(); ++i) p(i, 0) += 1.0;
    const Tensor q = rng.normal_matrix(cfg.dpi_samples, 2);
    report.add_abs("knn_gaussian_shift_error", kl_knn(p, q, cfg.knn_k) - 0.5, 0.1);
  }
  return report;
}

}  // namespace hypernoise
