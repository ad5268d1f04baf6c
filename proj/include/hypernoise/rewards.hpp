#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hypernoise/autodiff.hpp"
#include "hypernoise/tensor.hpp"

namespace hypernoise {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Differentiable scalar reward on generator outputs.
///
/// Image rewards read the output as channel-major H*W*3 values: all red
/// entries first, then green, then blue.
class Reward {
 public:
  struct Linear {
    Tensor c;
  };
  /// r(x) = sign * 0.5 * x^T Q x with Q symmetric.
  struct Quadratic {
    Tensor q;
    double sign = -1.0;
  };
  /// r(x) = scale * (mean_red - (mean_green + mean_blue) / 2)
  struct Redness {
    double scale = 0.01;
  };
  struct Part;
  struct Composite {
    std::vector<Part> parts;
  };

  static Reward linear(Tensor c);
  static Reward quadratic(Tensor q, double sign);
  static Reward redness(double scale);
  static Reward composite(std::vector<std::pair<Reward, double>> parts);
  /// r == 0 on R^dim.
  static Reward zero(std::size_t dim);

  double evaluate(const Tensor& x) const;
  /// One reward per row of `x`.
  std::vector<double> evaluate_batch(const Tensor& x) const;
  Tensor gradient(const Tensor& x) const;

  /// Appends per-row rewards (n x 1) for the rows of node `x` (each of width `dim`) to `graph`.
  NodeId build(Graph& graph, NodeId x, std::size_t dim) const;

  /// Range of r over the box [lo, hi]^dim, when one can be bounded.
  std::optional<Interval> range_over_box(std::size_t dim, double lo, double hi) const;

  bool is_identically_zero() const;
  std::string describe() const;

  using Variant = std::variant<Linear, Quadratic, Redness, Composite>;
  const Variant& variant() const noexcept { return *variant_; }

 private:
  explicit Reward(Variant v);
  void check_dim(std::size_t dim) const;
  /// Weight vector w with r(x) = w . x, for linear-form variants.
  std::optional<Tensor> linear_weights(std::size_t dim) const;

  std::shared_ptr<const Variant> variant_;
};

struct Reward::Part {
  Reward reward;
  double weight;
};

}  // namespace hypernoise
