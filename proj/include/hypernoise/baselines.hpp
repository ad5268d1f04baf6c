#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "hypernoise/generators.hpp"
#include "hypernoise/parameters.hpp"
#include "hypernoise/rewards.hpp"
#include "hypernoise/training.hpp"

namespace hypernoise {

// ---------------------------------------------------------------- noise optimization

struct NoiseOptConfig {
  std::size_t steps = 100;
  double learning_rate = 0.1;
  double reg_weight = 1.0;  // lambda in lambda/2 ||x0||^2
  std::uint64_t seed = 0;

  void validate() const;
};

struct NoiseOptResult {
  Tensor x0_star;
  std::vector<double> rewards;     // r(g(x0)) after each step
  std::vector<double> objectives;  // r(g(x0)) - lambda/2 ||x0||^2 after each step
  bool aborted = false;            // non-finite objective; x0_star is the best finite iterate
};

/// Gradient ascent on r(g(x0)) - lambda/2 ||x0||^2 from x0_init.
NoiseOptResult noise_opt(const Generator& g, const Reward& r, const Tensor& x0_init, const NoiseOptConfig& cfg,
                         const std::optional<Tensor>& condition = std::nullopt);

/// Runs noise_opt from each row of x0_init (rows are independent problems).
std::vector<NoiseOptResult> noise_opt_batch(const Generator& g, const Reward& r, const Tensor& x0_init,
                                            const NoiseOptConfig& cfg,
                                            const std::optional<Tensor>& conditions = std::nullopt);

// ---------------------------------------------------------------- best of n

struct BestOfNResult {
  Tensor best_sample;  // g(best noise)
  Tensor best_noise;
  double best_reward = 0.0;
  std::size_t best_index = 0;
  std::vector<double> rewards;  // reward of each draw, in draw order
};

/// Draws n noises from one seeded stream (so smaller n sees a prefix of the same draws).
BestOfNResult best_of_n(const Generator& g, const Reward& r, std::size_t n, std::uint64_t seed,
                        const std::optional<Tensor>& condition = std::nullopt);

// ---------------------------------------------------------------- direct fine-tuning

/// A generator with LoRA adapters (and optional bias deltas) on its own layers.
/// Parameters are named "layer<l>.down", "layer<l>.up" and "layer<l>.bias".
class AdaptedGenerator {
 public:
  AdaptedGenerator(std::shared_ptr<const Generator> base, std::size_t rank, double lora_alpha, bool adapt_bias,
                   std::uint64_t seed);

  const Generator& base() const noexcept { return *base_; }
  std::shared_ptr<const Generator> base_ptr() const noexcept { return base_; }
  const ParameterSet& parameters() const noexcept { return params_; }
  void set_parameters(ParameterSet params);
  std::size_t rank() const noexcept { return rank_; }
  double scale() const noexcept { return rank_ == 0 ? 0.0 : lora_alpha_ / static_cast<double>(rank_); }

  NodeId build(Graph& graph, NodeId x0, std::optional<NodeId> condition, ParamMode mode,
               std::size_t steps = 1) const;
  Tensor generate_batch(const Tensor& x0, const std::optional<Tensor>& conditions = std::nullopt,
                        std::size_t steps = 1) const;
  /// A plain Generator with the adapters merged into its weights.
  Generator materialize() const;
  /// Global L2 distance of the adapted weights and biases from the base.
  double drift() const;

 private:
  std::shared_ptr<const Generator> base_;
  std::size_t rank_;
  double lora_alpha_;
  bool adapt_bias_;
  ParameterSet params_;
};

struct DirectFinetuneConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer;
  double grad_norm_clip = 1.0;
  std::uint64_t seed = 0;
  std::size_t rank = 2;  // 0 = bias deltas only
  double lora_alpha = 4.0;
  bool adapt_bias = false;
  std::size_t log_every = 50;

  void validate() const;
};

struct DirectFinetuneRow {
  std::size_t step = 0;
  double reward_mean = 0.0;  // batch mean before the update
  double grad_norm = 0.0;
  double drift = 0.0;  // after the update
  double wall_time = 0.0;
};

struct DirectFinetuneResult {
  AdaptedGenerator generator;
  std::vector<DirectFinetuneRow> history;
  TrainStatus status = TrainStatus::Completed;
  std::string message;
  std::size_t steps_completed = 0;
};

using FinetuneEvalHook = std::function<void(std::size_t step, const AdaptedGenerator& g)>;

struct FinetuneOptions {
  std::optional<std::vector<Tensor>> conditions;
  FinetuneEvalHook on_eval;
  std::size_t eval_every = 0;
  bool record_time = false;
};

/// Reward-only ascent on generator adapters: loss = -mean r(g_phi(x0)), no fidelity term.
DirectFinetuneResult train_direct_finetune(std::shared_ptr<const Generator> g, const Reward& r,
                                           const DirectFinetuneConfig& cfg, const FinetuneOptions& options = {});

}  // namespace hypernoise
