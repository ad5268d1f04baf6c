#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hypernoise/baselines.hpp"
#include "hypernoise/generators.hpp"
#include "hypernoise/rewards.hpp"
#include "hypernoise/theory.hpp"
#include "hypernoise/training.hpp"

namespace hypernoise {

enum class Method { Hypernoise, DirectFt, NoiseOpt, BestOfN };
enum class FidelityMetric { KnnKl, GaussianKl };

std::string to_string(Method m);
std::string to_string(FidelityMetric f);

struct RewardConfig {
  std::string kind = "zero";  // zero | linear | quadratic | redness | composite
  std::vector<double> c;
  std::vector<std::vector<double>> q;
  double sign = -1.0;
  double scale = 0.01;
  double weight = 1.0;  // as a composite part
  std::vector<std::pair<std::string, RewardConfig>> parts;
};

/// Builds the reward for outputs of length `output_dim`.
Reward make_reward(const RewardConfig& rc, std::size_t output_dim);

struct EvalConfig {
  std::size_t heldout = 1000;    // held-out noise draws per evaluation
  std::size_t reference = 1000;  // base outputs used as the fidelity reference
  std::size_t eval_every = 100;
  FidelityMetric fidelity = FidelityMetric::KnnKl;
  std::size_t knn_k = 5;
  std::vector<std::size_t> multistep{1};
  std::size_t diversity_seeds = 20;
  std::size_t diversity_samples = 64;
};

struct BaselineConfig {
  NoiseOptConfig noise_opt;
  std::size_t best_of_n = 16;
};

struct ExperimentConfig {
  Method method = Method::Hypernoise;
  std::uint64_t seed = 0;
  std::string output_dir;  // may be overridden on the command line
  GeneratorSpec generator;
  RewardConfig reward;
  TrainConfig train;
  bool adapt_bias = false;  // direct fine-tuning only
  std::vector<Tensor> conditions;
  BaselineConfig baseline;
  EvalConfig eval;
  TheoryConfig theory;
};

/// Parses the sectioned key = value format. Unknown sections or keys,
/// malformed values and failed validation raise ConfigError naming the field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Every field, defaults included, in the same format parse_config reads.
std::string to_ini(const ExperimentConfig& cfg);

/// Checks cross-field constraints (dimensions, method-specific settings).
void validate(const ExperimentConfig& cfg);

/// Sets the run seed and every seed derived from it.
void set_seed(ExperimentConfig& cfg, std::uint64_t seed);

/// Generator weights are derived from the run seed.
Generator build_generator(const ExperimentConfig& cfg);

}  // namespace hypernoise
