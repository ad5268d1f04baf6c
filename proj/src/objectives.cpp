#include "hypernoise/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hypernoise/errors.hpp"
#include "hypernoise/linalg.hpp"

namespace hypernoise {

HypernoiseLoss::HypernoiseLoss(const NoiseHypernetwork& hn, const Generator& g, Reward r, double alpha,
                               std::size_t batch_size)
    : reward_(std::move(r)), alpha_(alpha), batch_size_(batch_size), conditional_(g.condition_dim() > 0) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("hypernoise loss: alpha must be > 0");
  if (batch_size == 0) throw DomainError("hypernoise loss: empty batch");
  if (g.latent_dim() != hn.latent_dim()) throw ShapeError("hypernoise loss: generator/hypernetwork latent mismatch");
  const double n = static_cast<double>(batch_size);
  NodeId x0 = graph_.input("x0", false);
  std::optional<NodeId> c;
  if (conditional_) c = graph_.input("c", false);
  NodeId delta = hn.build(graph_, x0, c, ParamMode::Trainable);
  NodeId out = g.build(graph_, graph_.add(x0, delta), c);
  rewards_ = reward_.build(graph_, out, g.output_dim());
  l2_ = graph_.scale(graph_.sum(graph_.mul(delta, delta)), 0.5 / n);
  reward_term_ = graph_.scale(graph_.sum(rewards_), 1.0 / (n * alpha));
  graph_.set_root(graph_.sub(l2_, reward_term_));
}

LossResult HypernoiseLoss::evaluate(const ParameterSet& params, const Tensor& noise,
                                    const std::optional<Tensor>& conditions) {
  if (noise.rows() != batch_size_) {
    throw ShapeError("hypernoise loss: batch has " + std::to_string(noise.rows()) + " rows, graph built for " +
                     std::to_string(batch_size_));
  }
  if (conditional_ != conditions.has_value()) {
    throw ShapeError("hypernoise loss: conditions must be given iff the generator is conditional");
  }
  Bindings b = params;
  b["x0"] = noise;
  if (conditions) b["c"] = *conditions;
  const Tensor total = graph_.forward(b);

  const Tensor& rw = graph_.value(rewards_);
  for (std::size_t i = 0; i < rw.size(); ++i) {
    if (!std::isfinite(rw[i])) throw NumericalError("hypernoise loss: non-finite reward at sample " + std::to_string(i), i);
  }

  LossResult out;
  out.breakdown.l2_term = graph_.value(l2_).item();
  out.breakdown.reward_term = graph_.value(reward_term_).item();
  out.breakdown.total = total.item();
  out.breakdown.batch_size = batch_size_;
  out.breakdown.alpha = alpha_;
  Gradients grads = graph_.backward();
  for (auto& [name, t] : grads) out.gradients[name] = std::move(t);
  return out;
}

LossResult hypernoise_loss(const NoiseHypernetwork& hn, const Generator& g, const Reward& r, const Tensor& noise,
                           const std::optional<Tensor>& conditions, double alpha) {
  const Tensor batch = noise.rank() == 2 ? noise : noise.reshaped(Shape{1, noise.size()});
  HypernoiseLoss loss(hn, g, r, alpha, batch.rows());
  return loss.evaluate(hn.parameters(), batch, conditions);
}

std::vector<Tensor> hypernet_jacobians(const NoiseHypernetwork& hn, const Tensor& x0_in,
                                       const std::optional<Tensor>& conditions) {
  const std::size_t d = hn.latent_dim();
  if (d > kMaxJacobianDim) {
    throw DomainError("hypernet_jacobians: latent_dim " + std::to_string(d) + " exceeds " +
                      std::to_string(kMaxJacobianDim));
  }
  const Tensor x0 = x0_in.rank() == 2 ? x0_in : x0_in.reshaped(Shape{1, x0_in.size()});
  const std::size_t n = x0.rows();
  Graph graph;
  NodeId x = graph.input("x0", true);
  std::optional<NodeId> c;
  if (hn.condition_dim() > 0) c = graph.input("c", false);
  graph.set_root(hn.build(graph, x, c, ParamMode::Frozen));
  Bindings b{{"x0", x0}};
  if (conditions) b["c"] = *conditions;
  graph.forward(b);

  // Samples are independent rows, so seeding output column j for every row at
  // once returns row j of each sample's Jacobian.
  std::vector<Tensor> jac(n, Tensor::zeros(d, d));
  for (std::size_t j = 0; j < d; ++j) {
    Tensor seed = Tensor::zeros(n, d);
    for (std::size_t i = 0; i < n; ++i) seed(i, j) = 1.0;
    const Tensor gx = graph.backward(seed).at("x0");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) jac[i](j, k) = gx(i, k);
    }
  }
  return jac;
}

KlBreakdown exact_noise_kl(const NoiseHypernetwork& hn, const Tensor& noise_in,
                           const std::optional<Tensor>& conditions) {
  const Tensor noise = noise_in.rank() == 2 ? noise_in : noise_in.reshaped(Shape{1, noise_in.size()});
  const std::size_t n = noise.rows();
  const std::size_t d = hn.latent_dim();
  if (n == 0) throw DomainError("exact_noise_kl: no samples");

  const Tensor delta = hn.perturbation_batch(noise, conditions);
  const auto jac = hypernet_jacobians(hn, noise, conditions);

  KlBreakdown kb;
  kb.n_samples = n;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (double v : delta.row(i)) sq += v * v;
    linalg::TraceLogDet tl;
    try {
      tl = linalg::logdet_and_trace(jac[i]);
    } catch (const SingularMatrixError&) {
      throw SingularMatrixError("exact_noise_kl: I + J is singular at sample " + std::to_string(i));
    }
    kb.l2_term += 0.5 * sq;
    kb.trace_term += tl.trace;
    kb.logdet_term += tl.log_abs_det_i_plus_j;
    kb.max_abs_error_term = std::max(kb.max_abs_error_term, std::abs(tl.trace - tl.log_abs_det_i_plus_j));
  }
  const double inv = 1.0 / static_cast<double>(n);
  kb.l2_term *= inv;
  kb.trace_term *= inv;
  kb.logdet_term *= inv;
  kb.exact_kl = kb.l2_term + kb.trace_term - kb.logdet_term;
  kb.approx_error = kb.exact_kl - kb.l2_term;

  kb.lipschitz_used = hn.lipschitz_upper_bound();
  kb.lipschitz_sampled = lipschitz_lower_bound(hn, 512, 0x11b5ULL);
  kb.bound_applicable = kb.lipschitz_used < 1.0;
  kb.bound = kb.bound_applicable ? theorem_bound(d, kb.lipschitz_used) : std::numeric_limits<double>::quiet_NaN();
  return kb;
}

double error_term(const Tensor& j) {
  const auto tl = linalg::logdet_and_trace(j);
  return tl.trace - tl.log_abs_det_i_plus_j;
}

double theorem_bound(std::size_t d, double lipschitz) {
  if (!(lipschitz >= 0.0) || !(lipschitz < 1.0)) {
    throw DomainError("theorem_bound: requires 0 <= L < 1, got L = " + std::to_string(lipschitz));
  }
  return static_cast<double>(d) * (-std::log1p(-lipschitz) - lipschitz);
}

}  // namespace hypernoise
