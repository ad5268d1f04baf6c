#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hypernoise/autodiff.hpp"
#include "hypernoise/generators.hpp"
#include "hypernoise/hypernet.hpp"
#include "hypernoise/parameters.hpp"
#include "hypernoise/rewards.hpp"

namespace hypernoise {

struct LossBreakdown {
  double l2_term = 0.0;      // mean 0.5 ||f(x0)||^2
  double reward_term = 0.0;  // mean r(g(x0 + f(x0))) / alpha
  double total = 0.0;        // l2_term - reward_term
  std::size_t batch_size = 0;
  double alpha = 1.0;
};

struct LossResult {
  LossBreakdown breakdown;
  ParameterSet gradients;  // keyed like hn.parameters()
};

/// The training objective as a reusable graph: built once for a given batch
/// size, re-evaluated with new noise and parameters every step.
class HypernoiseLoss {
 public:
  HypernoiseLoss(const NoiseHypernetwork& hn, const Generator& g, Reward r, double alpha, std::size_t batch_size);

  LossResult evaluate(const ParameterSet& params, const Tensor& noise,
                      const std::optional<Tensor>& conditions = std::nullopt);

  std::size_t batch_size() const noexcept { return batch_size_; }

 private:
  Reward reward_;
  double alpha_;
  std::size_t batch_size_;
  bool conditional_;
  Graph graph_;
  NodeId rewards_ = 0;
  NodeId l2_ = 0;
  NodeId reward_term_ = 0;
};

/// One-shot loss and parameter gradients over a batch of noise (rows are samples).
/// Throws NumericalError naming the sample when a reward is non-finite.
LossResult hypernoise_loss(const NoiseHypernetwork& hn, const Generator& g, const Reward& r, const Tensor& noise,
                           const std::optional<Tensor>& conditions, double alpha);

struct KlBreakdown {
  double l2_term = 0.0;
  double trace_term = 0.0;
  double logdet_term = 0.0;
  double exact_kl = 0.0;      // l2 + trace - logdet
  double approx_error = 0.0;  // exact_kl - l2_term
  double bound = 0.0;         // theorem_bound(d, lipschitz_used); NaN when not applicable
  bool bound_applicable = false;
  double lipschitz_used = 0.0;     // spectral-product upper bound
  double lipschitz_sampled = 0.0;  // sampled lower bound, logged for comparison
  double max_abs_error_term = 0.0;  // max over samples of |Tr J - log|det(I + J)||
  std::size_t n_samples = 0;
};

inline constexpr std::size_t kMaxJacobianDim = 64;

/// Per-sample Jacobians d f(x0_i) / d x0_i by reverse mode, one backward pass per output row.
std::vector<Tensor> hypernet_jacobians(const NoiseHypernetwork& hn, const Tensor& x0,
                                       const std::optional<Tensor>& conditions = std::nullopt);

/// Monte-Carlo estimate of KL(p0^phi || p0) with the full Jacobian terms.
/// Throws SingularMatrixError naming the sample when I + J is singular.
KlBreakdown exact_noise_kl(const NoiseHypernetwork& hn, const Tensor& noise,
                           const std::optional<Tensor>& conditions = std::nullopt);

/// Tr A - log |det(I + A)|.
double error_term(const Tensor& j);

/// d * (-ln(1 - L) - L); DomainError unless 0 <= L < 1.
double theorem_bound(std::size_t d, double lipschitz);

}  // namespace hypernoise
