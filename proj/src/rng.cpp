#include "hypernoise/rng.hpp"

namespace hypernoise {

std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix_seed(seed ^ mix_seed(h));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix_seed(seed ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

Tensor Rng::normal_matrix(std::size_t rows, std::size_t cols, double scale) {
  Tensor t = Tensor::zeros(rows, cols);
  for (auto& v : t.data()) v = scale * normal();
  return t;
}

Tensor Rng::normal_vector(std::size_t n, double scale) {
  Tensor t(Shape{n});
  for (auto& v : t.data()) v = scale * normal();
  return t;
}

}  // namespace hypernoise
