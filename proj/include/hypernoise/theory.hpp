#pragma once

#include <cstdint>
#include <vector>

#include "hypernoise/oracles.hpp"

namespace hypernoise {

struct TheoryConfig {
  std::size_t latent_dim = 4;
  std::size_t networks = 20;  // random hypernetworks per check, spread over the budgets
  std::vector<double> lipschitz_budgets{0.05, 0.1, 0.3, 0.5};
  std::size_t points_per_network = 200;
  std::vector<std::size_t> stein_dims{2, 4, 8};
  std::size_t stein_networks = 4;
  std::size_t stein_samples = 20000;
  std::size_t pushforward_samples = 20000;
  std::size_t dpi_samples = 2000;
  std::size_t knn_k = 5;
  std::size_t gradient_points = 20;

  void validate() const;
};

/// Runs every oracle check and returns one row per check. Deterministic in `seed`.
TheoryReport run_theory_suite(const TheoryConfig& cfg, std::uint64_t seed);

}  // namespace hypernoise
