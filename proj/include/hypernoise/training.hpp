#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hypernoise/generators.hpp"
#include "hypernoise/hypernet.hpp"
#include "hypernoise/parameters.hpp"
#include "hypernoise/rewards.hpp"

namespace hypernoise {

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 1e-3;
  double momentum = 0.0;  // sgd
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Stateful first-order optimizer over a ParameterSet.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg);
  void step(ParameterSet& params, const ParameterSet& grads);
  const OptimizerConfig& config() const noexcept { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::size_t t_ = 0;
  ParameterSet m_;
  ParameterSet v_;
};

/// Rescales grads in place so their global norm is at most max_norm; returns the norm before clipping.
double clip_global_norm(ParameterSet& grads, double max_norm);

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer;
  double grad_norm_clip = 1.0;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::size_t rank = 2;
  double lora_alpha = 4.0;
  bool adapt_hidden = true;
  std::size_t log_every = 50;
  std::size_t checkpoint_every = 0;  // 0 = only at the end (when a path is set)
  std::optional<std::filesystem::path> checkpoint_path;
  std::optional<double> l2_ceiling;  // default 10 * latent_dim
  std::size_t lipschitz_pairs = 256;

  void validate() const;
};

struct TrainHistoryRow {
  std::size_t step = 0;
  double l2_term = 0.0;
  double reward_term = 0.0;
  double total_loss = 0.0;
  double grad_norm = 0.0;  // before clipping
  double lipschitz_audit = 0.0;
  double wall_time = 0.0;  // seconds since start; only filled when timing is requested
};

struct TrainHistory {
  std::vector<TrainHistoryRow> rows;
  /// CSV with columns step,l2_term,reward_term,total_loss,grad_norm,lipschitz_audit,wall_time
  std::string to_csv() const;
};

enum class TrainStatus { Completed, NonFiniteLoss, RegularizationBreach };

std::string to_string(TrainStatus s);

struct TrainResult {
  NoiseHypernetwork hn;
  TrainHistory history;
  TrainStatus status = TrainStatus::Completed;
  std::string message;
  std::size_t steps_completed = 0;
};

/// Called with (step, current hypernetwork) after the update of every step
/// where step % eval_every == 0, and after the last completed step.
using TrainEvalHook = std::function<void(std::size_t step, const NoiseHypernetwork& hn)>;

struct TrainOptions {
  std::optional<std::vector<Tensor>> conditions;  // sampled uniformly per sample
  TrainEvalHook on_eval;
  std::size_t eval_every = 0;  // 0 = never, except via the final call
  bool record_time = false;
};

/// Fits a zero-initialized hypernetwork on g by SGD/Adam on the noise-space
/// objective with fresh noise each step. Deterministic given cfg.seed.
/// On a non-finite loss or an l2 ceiling breach the run stops and the result
/// holds the last parameters that produced a finite loss.
TrainResult train_hypernoise(std::shared_ptr<const Generator> g, const Reward& r, const TrainConfig& cfg,
                             const TrainOptions& options = {});

/// Continues training an existing hypernetwork (same rules as above).
TrainResult train_hypernoise(NoiseHypernetwork hn, const Reward& r, const TrainConfig& cfg,
                             const TrainOptions& options = {});

// ---------------------------------------------------------------- checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const NoiseHypernetwork& hn, const std::filesystem::path& path);
/// Throws CheckpointError on a malformed file or a backbone fingerprint mismatch.
NoiseHypernetwork load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const Generator> g);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace hypernoise
