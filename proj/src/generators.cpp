#include "hypernoise/generators.hpp"

#include <cmath>

#include "hypernoise/errors.hpp"
#include "hypernoise/kernels.hpp"
#include "hypernoise/rng.hpp"

namespace hypernoise {

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Affine: return "affine";
    case GeneratorKind::Mlp: return "mlp";
    case GeneratorKind::ImageDecoder: return "image_decoder";
  }
  return "?";
}

GeneratorKind generator_kind_from_string(const std::string& name) {
  if (name == "affine") return GeneratorKind::Affine;
  if (name == "mlp") return GeneratorKind::Mlp;
  if (name == "image_decoder") return GeneratorKind::ImageDecoder;
  throw ConfigError("unknown generator variant '" + name + "' (expected affine, mlp, image_decoder)");
}

Generator::Generator(GeneratorSpec spec, std::vector<DenseLayer> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("generator needs at least one layer");
  if (layers_.front().in_dim() != spec_.latent_dim + spec_.condition_dim) {
    throw ShapeError("generator: first layer input does not match latent_dim + condition_dim");
  }
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    if (layers_[l].in_dim() != layers_[l - 1].out_dim()) throw ShapeError("generator: layer shapes do not chain");
  }
  for (const auto& layer : layers_) {
    if (layer.bias.size() != layer.out_dim()) throw ShapeError("generator: bias length mismatch");
  }
  if (layers_.back().out_dim() != spec_.output_dim) throw ShapeError("generator: last layer width != output_dim");
}

void Generator::check_inputs(const Tensor& x0, const std::optional<Tensor>& conditions, std::size_t steps) const {
  if (steps == 0) throw DomainError("generate: steps must be >= 1");
  if (x0.cols() != spec_.latent_dim) {
    throw ShapeError("generate: noise has " + std::to_string(x0.cols()) + " entries, expected latent_dim " +
                     std::to_string(spec_.latent_dim));
  }
  if (spec_.condition_dim == 0 && conditions) throw ShapeError("generate: generator takes no condition");
  if (spec_.condition_dim > 0) {
    if (!conditions) throw ShapeError("generate: condition required");
    if (conditions->cols() != spec_.condition_dim || conditions->rows() != x0.rows()) {
      throw ShapeError("generate: condition shape " + shape_to_string(conditions->shape()) + " does not match");
    }
  }
}

Tensor Generator::net_batch(const Tensor& input) const {
  Tensor h = input;
  for (const auto& layer : layers_) {
    Tensor z = Tensor::zeros(h.rows(), layer.out_dim());
    kernels::matmul_nt(h.data(), layer.weight.data(), z.data(), h.rows(), layer.in_dim(), layer.out_dim());
    const auto cols = layer.out_dim();
    auto zd = z.data();
    for (std::size_t i = 0; i < zd.size(); ++i) zd[i] = apply_activation(layer.activation, zd[i] + layer.bias[i % cols]);
    h = std::move(z);
  }
  return h;
}

namespace {

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::zeros(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = c.row(i);
    std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
    std::copy(b.row(i).begin(), b.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return c;
}

double step_noise_scale(const MultiStepSchedule& s, std::size_t k) {
  return 1.0 / (1.0 + s.shrink * static_cast<double>(k - 1));
}

}  // namespace

Tensor Generator::generate_batch(const Tensor& x0_in, const std::optional<Tensor>& conditions,
                                 std::size_t steps) const {
  const Tensor x0 = x0_in.rank() == 2 ? x0_in : x0_in.reshaped(Shape{1, x0_in.size()});
  check_inputs(x0, conditions, steps);
  auto input_for = [&](const Tensor& x) { return conditions ? concat_cols(x, *conditions) : x; };
  Tensor u = net_batch(input_for(x0));
  for (std::size_t k = 2; k <= steps; ++k) {
    Tensor xs = x0;
    const double sigma = step_noise_scale(spec_.schedule, k);
    for (auto& v : xs.data()) v *= sigma;
    Tensor fresh = net_batch(input_for(xs));
    const double beta = spec_.schedule.blend;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = (1.0 - beta) * u[i] + beta * fresh[i];
  }
  return u;
}

Tensor Generator::generate(const Tensor& x0, const std::optional<Tensor>& condition, std::size_t steps) const {
  if (x0.size() != spec_.latent_dim) {
    throw ShapeError("generate: noise has " + std::to_string(x0.size()) + " entries, expected latent_dim " +
                     std::to_string(spec_.latent_dim));
  }
  std::optional<Tensor> c;
  if (condition) c = condition->reshaped(Shape{1, condition->size()});
  Tensor out = generate_batch(x0.reshaped(Shape{1, x0.size()}), c, steps);
  return out.reshaped(Shape{spec_.output_dim});
}

NodeId Generator::build(Graph& graph, NodeId x0, std::optional<NodeId> condition, std::size_t steps,
                        const LayerHook& hook) const {
  if (steps == 0) throw DomainError("generator graph: steps must be >= 1");
  if ((spec_.condition_dim > 0) != condition.has_value()) {
    throw ShapeError("generator graph: condition node must be given iff the generator is conditional");
  }
  std::vector<NodeId> weights, biases;
  for (const auto& layer : layers_) {
    weights.push_back(graph.constant(layer.weight));
    biases.push_back(graph.constant(layer.bias.reshaped(Shape{1, layer.out_dim()})));
  }
  auto net = [&](NodeId x) {
    NodeId h = condition ? graph.concat_cols(x, *condition) : x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      NodeId z = graph.add(graph.matmul_nt(h, weights[l]), biases[l]);
      if (hook) z = hook(graph, l, h, z);
      h = layers_[l].activation == Activation::Identity ? z : graph.activation(layers_[l].activation, z);
    }
    return h;
  };
  NodeId u = net(x0);
  for (std::size_t k = 2; k <= steps; ++k) {
    NodeId fresh = net(graph.scale(x0, step_noise_scale(spec_.schedule, k)));
    const double beta = spec_.schedule.blend;
    u = graph.add(graph.scale(u, 1.0 - beta), graph.scale(fresh, beta));
  }
  return u;
}

std::uint64_t Generator::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(spec_.kind));
  mix(spec_.latent_dim);
  mix(spec_.output_dim);
  mix(spec_.condition_dim);
  for (const auto& layer : layers_) {
    mix(static_cast<std::uint64_t>(layer.activation));
    h = checksum(layer.weight, h);
    h = checksum(layer.bias, h);
  }
  return h;
}

std::optional<std::pair<double, double>> Generator::output_box() const {
  if (layers_.back().activation == Activation::Sigmoid) return std::make_pair(0.0, 1.0);
  if (layers_.back().activation == Activation::Tanh) return std::make_pair(-1.0, 1.0);
  return std::nullopt;
}

Generator make_generator(const GeneratorSpec& spec_in, std::uint64_t seed) {
  GeneratorSpec spec = spec_in;
  if (spec.latent_dim == 0) throw ConfigError("generator: latent_dim must be >= 1");
  Rng rng(derive_seed(seed, "generator"));
  std::vector<DenseLayer> layers;

  switch (spec.kind) {
    case GeneratorKind::Affine: {
      if (spec.condition_dim != 0) throw ConfigError("generator: affine variant does not take a condition");
      if (!spec.hidden.empty()) throw ConfigError("generator: affine variant has no hidden layers");
      DenseLayer layer;
      if (spec.affine_matrix) {
        layer.weight = spec.affine_matrix->reshaped(Shape{spec.affine_matrix->rows(), spec.affine_matrix->cols()});
        if (layer.weight.cols() != spec.latent_dim) {
          throw ConfigError("generator: affine matrix has " + std::to_string(layer.weight.cols()) +
                            " columns, expected latent_dim " + std::to_string(spec.latent_dim));
        }
        spec.output_dim = layer.weight.rows();
      } else {
        if (spec.output_dim == 0) throw ConfigError("generator: output_dim must be >= 1");
        layer.weight = rng.normal_matrix(spec.output_dim, spec.latent_dim, 1.0 / std::sqrt(double(spec.latent_dim)));
      }
      if (spec.affine_bias) {
        if (spec.affine_bias->size() != spec.output_dim) throw ConfigError("generator: affine bias length mismatch");
        layer.bias = spec.affine_bias->reshaped(Shape{spec.output_dim});
      } else {
        layer.bias = Tensor(Shape{spec.output_dim}, 0.0);
      }
      layer.activation = Activation::Identity;
      layers.push_back(std::move(layer));
      break;
    }
    case GeneratorKind::Mlp:
    case GeneratorKind::ImageDecoder: {
      Activation out_act = Activation::Identity;
      if (spec.kind == GeneratorKind::ImageDecoder) {
        if (spec.image_height == 0 || spec.image_width == 0) {
          throw ConfigError("generator: image_decoder needs image_height and image_width");
        }
        spec.output_dim = spec.image_height * spec.image_width * 3;
        out_act = Activation::Sigmoid;
      }
      if (spec.output_dim == 0) throw ConfigError("generator: output_dim must be >= 1");
      std::vector<std::size_t> widths{spec.latent_dim + spec.condition_dim};
      for (auto h : spec.hidden) {
        if (h == 0) throw ConfigError("generator: hidden widths must be >= 1");
        widths.push_back(h);
      }
      widths.push_back(spec.output_dim);
      for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        DenseLayer layer;
        layer.weight = rng.normal_matrix(widths[l + 1], widths[l], 1.0 / std::sqrt(double(widths[l])));
        layer.bias = rng.normal_vector(widths[l + 1], spec.bias_scale);
        layer.activation = (l + 2 == widths.size()) ? out_act : spec.activation;
        layers.push_back(std::move(layer));
      }
      break;
    }
  }
  return Generator(std::move(spec), std::move(layers));
}

std::pair<Tensor, Tensor> sample_moments(const Tensor& samples) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  if (n < 2) throw DomainError("sample_moments: need at least two samples");
  Tensor mean(Shape{d}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += samples(i, j);
  }
  for (auto& v : mean.data()) v /= static_cast<double>(n);
  Tensor cov = Tensor::zeros(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double da = samples(i, a) - mean[a];
      for (std::size_t b = a; b < d; ++b) cov(a, b) += da * (samples(i, b) - mean[b]);
    }
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) /= static_cast<double>(n - 1);
      cov(b, a) = cov(a, b);
    }
  }
  return {mean, cov};
}

BaseOutputReference base_output_reference(const Generator& g, std::size_t n, std::uint64_t seed,
                                          const std::optional<Tensor>& conditions) {
  if (n < 2) throw DomainError("base_output_reference: n must be >= 2");
  Rng rng(seed);
  Tensor x0 = rng.normal_matrix(n, g.latent_dim());
  BaseOutputReference ref;
  ref.samples = g.generate_batch(x0, conditions);
  auto [mean, cov] = sample_moments(ref.samples);
  ref.mean = std::move(mean);
  ref.covariance = std::move(cov);
  ref.seed = seed;
  return ref;
}

}  // namespace hypernoise
