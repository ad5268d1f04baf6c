#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hypernoise/autodiff.hpp"
#include "hypernoise/tensor.hpp"

namespace hypernoise {

enum class GeneratorKind { Affine, Mlp, ImageDecoder };

std::string to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(const std::string& name);

/// Multi-call inference schedule. Step 1 is g(x0); step k >= 2 blends the
/// previous output with a fresh evaluation at a shrunken noise:
///   u_k = (1 - blend) u_{k-1} + blend * net(x0 / (1 + shrink (k - 1)))
struct MultiStepSchedule {
  double blend = 0.5;
  double shrink = 0.5;
};

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Mlp;
  std::size_t latent_dim = 2;
  std::size_t output_dim = 2;  // derived as H*W*3 for ImageDecoder
  std::size_t condition_dim = 0;
  std::vector<std::size_t> hidden;
  Activation activation = Activation::Tanh;
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  std::optional<Tensor> affine_matrix;  // d_out x d_in
  std::optional<Tensor> affine_bias;    // d_out
  double bias_scale = 0.1;
  MultiStepSchedule schedule;
};

struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out
  Activation activation = Activation::Identity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

/// Called while building a generator graph; may return a modified
/// pre-activation for layer `layer` (e.g. add an adapter term).
using LayerHook =
    std::function<NodeId(Graph& graph, std::size_t layer, NodeId layer_input, NodeId frozen_preactivation)>;

/// A frozen differentiable map from noise (plus optional condition) to output.
/// Weights never change after construction.
class Generator {
 public:
  Generator(GeneratorSpec spec, std::vector<DenseLayer> layers);

  const GeneratorSpec& spec() const noexcept { return spec_; }
  GeneratorKind kind() const noexcept { return spec_.kind; }
  std::size_t latent_dim() const noexcept { return spec_.latent_dim; }
  std::size_t output_dim() const noexcept { return spec_.output_dim; }
  std::size_t condition_dim() const noexcept { return spec_.condition_dim; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  /// Single sample: x0 has latent_dim entries; condition given iff condition_dim > 0.
  Tensor generate(const Tensor& x0, const std::optional<Tensor>& condition = std::nullopt,
                  std::size_t steps = 1) const;
  /// Batch: rows of x0 (n x latent_dim) are samples; conditions is n x condition_dim.
  Tensor generate_batch(const Tensor& x0, const std::optional<Tensor>& conditions = std::nullopt,
                        std::size_t steps = 1) const;

  /// Appends this generator to `graph`; returns the output node (rows = samples).
  NodeId build(Graph& graph, NodeId x0, std::optional<NodeId> condition = std::nullopt, std::size_t steps = 1,
               const LayerHook& hook = {}) const;

  /// Hash of the architecture and all weights.
  std::uint64_t fingerprint() const;

  /// Elementwise output range when bounded (the decoder's sigmoid gives [0, 1]).
  std::optional<std::pair<double, double>> output_box() const;

 private:
  Tensor net_batch(const Tensor& input) const;
  void check_inputs(const Tensor& x0, const std::optional<Tensor>& conditions, std::size_t steps) const;

  GeneratorSpec spec_;
  std::vector<DenseLayer> layers_;
};

/// Reproducible construction: the same (spec, seed) always yields identical weights.
/// Weights are N(0, 1/fan_in); biases N(0, bias_scale^2).
Generator make_generator(const GeneratorSpec& spec, std::uint64_t seed);

struct BaseOutputReference {
  Tensor mean;        // d_out
  Tensor covariance;  // d_out x d_out (unbiased)
  Tensor samples;     // n x d_out
  std::uint64_t seed = 0;
};

/// Moments of g(x0) over n draws x0 ~ N(0, I).
BaseOutputReference base_output_reference(const Generator& g, std::size_t n, std::uint64_t seed,
                                          const std::optional<Tensor>& conditions = std::nullopt);

/// Column mean and unbiased covariance of the rows of `samples`.
std::pair<Tensor, Tensor> sample_moments(const Tensor& samples);

}  // namespace hypernoise
