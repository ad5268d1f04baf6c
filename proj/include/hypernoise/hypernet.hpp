#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hypernoise/generators.hpp"
#include "hypernoise/parameters.hpp"

namespace hypernoise {

/// One low-rank adapter: down (rank x in) starts random, up (out x rank) starts at zero.
/// The head adapter sees its input augmented with a constant-1 column so the
/// perturbation can carry a constant offset.
struct LoraAdapter {
  std::string name;
  std::size_t layer = 0;
  std::size_t in_dim = 0;   // excluding the augmented column
  std::size_t out_dim = 0;
  std::size_t rank = 0;
  bool augmented = false;
  bool is_head = false;

  std::string down_name() const { return name + ".down"; }
  std::string up_name() const { return name + ".up"; }
  std::size_t down_cols() const { return in_dim + (augmented ? 1 : 0); }
  std::size_t parameter_count() const { return rank * (out_dim + down_cols()); }
};

struct Modulation {
  Tensor delta;  // f(x0)
  Tensor xhat;   // x0 + f(x0)
};

/// Residual noise map f(x0[, c]) built on a frozen generator backbone.
///
/// Hidden layers reuse the backbone weights plus a LoRA term; the backbone's
/// last layer is replaced by a perturbation-only head mapping to latent_dim.
/// With every up matrix at zero the network is identically zero.
class NoiseHypernetwork {
 public:
  NoiseHypernetwork(std::shared_ptr<const Generator> backbone, std::vector<LoraAdapter> adapters, double lora_alpha,
                    ParameterSet params);

  const Generator& backbone() const noexcept { return *backbone_; }
  std::shared_ptr<const Generator> backbone_ptr() const noexcept { return backbone_; }
  const std::vector<LoraAdapter>& adapters() const noexcept { return adapters_; }
  std::size_t latent_dim() const noexcept { return backbone_->latent_dim(); }
  std::size_t condition_dim() const noexcept { return backbone_->condition_dim(); }
  std::size_t rank() const noexcept { return adapters_.back().rank; }
  double lora_alpha() const noexcept { return lora_alpha_; }
  double scale() const noexcept { return lora_alpha_ / static_cast<double>(rank()); }

  const ParameterSet& parameters() const noexcept { return params_; }
  /// Replaces all parameters; names and shapes must match the adapter manifest.
  void set_parameters(ParameterSet params);
  /// Sets one adapter's matrices (mainly for constructing known maps in tests and oracles).
  void set_adapter(const std::string& name, Tensor down, Tensor up);
  std::size_t parameter_count() const { return hypernoise::parameter_count(params_); }

  /// f for a batch (rows of x0 are samples).
  Tensor perturbation_batch(const Tensor& x0, const std::optional<Tensor>& conditions = std::nullopt) const;
  /// delta = f(x0[, c]) and xhat = x0 + delta for a single sample or a batch.
  Modulation modulate(const Tensor& x0, const std::optional<Tensor>& condition = std::nullopt) const;

  /// Appends f to `graph` and returns the delta node.
  NodeId build(Graph& graph, NodeId x0, std::optional<NodeId> condition, ParamMode mode) const;

  /// Product of per-layer spectral norms times activation slope bounds, inflated
  /// by kLipschitzSafety. An upper bound on the Lipschitz constant of f in x0.
  double lipschitz_upper_bound() const;

 private:
  void validate(const ParameterSet& params) const;
  const LoraAdapter& adapter(const std::string& name) const;

  std::shared_ptr<const Generator> backbone_;
  std::vector<LoraAdapter> adapters_;
  double lora_alpha_;
  ParameterSet params_;
};

/// Safety factor applied to power-iteration spectral norms in the Lipschitz bound.
inline constexpr double kLipschitzSafety = 1.001;
inline constexpr std::size_t kSpectralIters = 300;

/// Zero-output hypernetwork on `backbone`. Throws DomainError when the rank
/// exceeds min(m, n) of any adapted layer.
NoiseHypernetwork init_hypernet(std::shared_ptr<const Generator> backbone, std::size_t rank, double lora_alpha,
                                std::uint64_t seed, bool adapt_hidden = true);

/// max ||f(x) - f(y)|| / ||x - y|| over sampled pairs; a lower bound on the true constant.
double lipschitz_lower_bound(const NoiseHypernetwork& hn, std::size_t n_pairs, std::uint64_t seed);

/// Randomizes every up matrix (N(0, 1)) and rescales the head so that
/// lipschitz_upper_bound() equals `budget`. Used to build networks with a known L.
void randomize_with_lipschitz_budget(NoiseHypernetwork& hn, double budget, std::uint64_t seed);

}  // namespace hypernoise
