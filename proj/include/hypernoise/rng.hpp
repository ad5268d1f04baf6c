#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "hypernoise/tensor.hpp"

namespace hypernoise {

/// splitmix64 finalizer; used to derive independent child seeds from one run seed.
std::uint64_t mix_seed(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

  /// rows x cols matrix of i.i.d. N(0, scale^2) draws, filled row by row.
  Tensor normal_matrix(std::size_t rows, std::size_t cols, double scale = 1.0);
  Tensor normal_vector(std::size_t n, double scale = 1.0);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace hypernoise
