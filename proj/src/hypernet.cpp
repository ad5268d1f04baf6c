#include "hypernoise/hypernet.hpp"

#include <algorithm>
#include <cmath>

#include "hypernoise/errors.hpp"
#include "hypernoise/kernels.hpp"
#include "hypernoise/linalg.hpp"
#include "hypernoise/rng.hpp"

namespace hypernoise {

namespace {

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::zeros(a.rows(), b.rows());
  kernels::matmul_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
  return c;
}

Tensor with_ones_column(const Tensor& a) {
  Tensor c = Tensor::zeros(a.rows(), a.cols() + 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = c.row(i);
    std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
    dst[a.cols()] = 1.0;
  }
  return c;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::zeros(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = c.row(i);
    std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
    std::copy(b.row(i).begin(), b.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return c;
}

}  // namespace

NoiseHypernetwork::NoiseHypernetwork(std::shared_ptr<const Generator> backbone, std::vector<LoraAdapter> adapters,
                                     double lora_alpha, ParameterSet params)
    : backbone_(std::move(backbone)), adapters_(std::move(adapters)), lora_alpha_(lora_alpha) {
  if (!backbone_) throw StateError("hypernetwork: null backbone");
  if (adapters_.empty() || !adapters_.back().is_head) throw StateError("hypernetwork: manifest must end with the head");
  if (!(lora_alpha_ > 0.0) || !std::isfinite(lora_alpha_)) throw DomainError("hypernetwork: lora alpha must be > 0");
  validate(params);
  params_ = std::move(params);
}

void NoiseHypernetwork::validate(const ParameterSet& params) const {
  std::size_t expected = 0;
  for (const auto& a : adapters_) {
    auto check = [&](const std::string& name, std::size_t rows, std::size_t cols) {
      auto it = params.find(name);
      if (it == params.end()) throw StateError("hypernetwork: missing parameter '" + name + "'");
      if (it->second.rank() != 2 || it->second.rows() != rows || it->second.cols() != cols) {
        throw ShapeError("hypernetwork: parameter '" + name + "' has shape " + shape_to_string(it->second.shape()) +
                         ", expected [" + std::to_string(rows) + "x" + std::to_string(cols) + "]");
      }
    };
    check(a.down_name(), a.rank, a.down_cols());
    check(a.up_name(), a.out_dim, a.rank);
    expected += 2;
  }
  if (params.size() != expected) throw StateError("hypernetwork: unexpected extra parameters");
}

void NoiseHypernetwork::set_parameters(ParameterSet params) {
  validate(params);
  params_ = std::move(params);
}

const LoraAdapter& NoiseHypernetwork::adapter(const std::string& name) const {
  for (const auto& a : adapters_) {
    if (a.name == name) return a;
  }
  throw StateError("hypernetwork: no adapter named '" + name + "'");
}

void NoiseHypernetwork::set_adapter(const std::string& name, Tensor down, Tensor up) {
  const auto& a = adapter(name);
  ParameterSet next = params_;
  next[a.down_name()] = std::move(down);
  next[a.up_name()] = std::move(up);
  set_parameters(std::move(next));
}

Tensor NoiseHypernetwork::perturbation_batch(const Tensor& x0_in, const std::optional<Tensor>& conditions) const {
  const Tensor x0 = x0_in.rank() == 2 ? x0_in : x0_in.reshaped(Shape{1, x0_in.size()});
  if (x0.cols() != latent_dim()) {
    throw ShapeError("hypernetwork: noise has " + std::to_string(x0.cols()) + " entries, expected " +
                     std::to_string(latent_dim()));
  }
  if ((condition_dim() > 0) != conditions.has_value()) {
    throw ShapeError("hypernetwork: condition must be given iff the backbone is conditional");
  }
  if (conditions && (conditions->cols() != condition_dim() || conditions->rows() != x0.rows())) {
    throw ShapeError("hypernetwork: condition shape mismatch");
  }
  const auto& layers = backbone_->layers();
  const double s = scale();
  Tensor h = conditions ? concat_cols(x0, *conditions) : x0;
  const auto& head = adapters_.back();
  std::size_t next_adapter = 0;
  for (std::size_t l = 0; l < head.layer; ++l) {
    const auto& layer = layers[l];
    Tensor z = matmul_nt(h, layer.weight);
    const auto cols = layer.out_dim();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.bias[i % cols];
    if (next_adapter < adapters_.size() - 1 && adapters_[next_adapter].layer == l) {
      const auto& a = adapters_[next_adapter++];
      Tensor lora = matmul_nt(matmul_nt(h, params_.at(a.down_name())), params_.at(a.up_name()));
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += s * lora[i];
    }
    for (auto& v : z.data()) v = apply_activation(layer.activation, v);
    h = std::move(z);
  }
  Tensor delta = matmul_nt(matmul_nt(with_ones_column(h), params_.at(head.down_name())), params_.at(head.up_name()));
  for (auto& v : delta.data()) v *= s;
  return delta;
}

Modulation NoiseHypernetwork::modulate(const Tensor& x0, const std::optional<Tensor>& condition) const {
  if (x0.rank() <= 1) {
    std::optional<Tensor> c;
    if (condition) c = condition->reshaped(Shape{1, condition->size()});
    Tensor delta = perturbation_batch(x0.reshaped(Shape{1, x0.size()}), c).reshaped(x0.shape());
    if (!delta.all_finite()) throw NumericalError("modulate: non-finite perturbation", 0);
    Tensor xhat = linalg::add(x0, delta);
    return {std::move(delta), std::move(xhat)};
  }
  Tensor delta = perturbation_batch(x0, condition);
  for (std::size_t i = 0; i < delta.rows(); ++i) {
    for (double v : delta.row(i)) {
      if (!std::isfinite(v)) throw NumericalError("modulate: non-finite perturbation at sample " + std::to_string(i), i);
    }
  }
  Tensor xhat = linalg::add(x0, delta);
  return {std::move(delta), std::move(xhat)};
}

NodeId NoiseHypernetwork::build(Graph& graph, NodeId x0, std::optional<NodeId> condition, ParamMode mode) const {
  if ((condition_dim() > 0) != condition.has_value()) {
    throw ShapeError("hypernetwork graph: condition node must be given iff the backbone is conditional");
  }
  const auto& layers = backbone_->layers();
  const double s = scale();
  NodeId h = condition ? graph.concat_cols(x0, *condition) : x0;
  const auto& head = adapters_.back();
  std::size_t next_adapter = 0;
  for (std::size_t l = 0; l < head.layer; ++l) {
    const auto& layer = layers[l];
    NodeId z = graph.add(graph.matmul_nt(h, graph.constant(layer.weight)),
                         graph.constant(layer.bias.reshaped(Shape{1, layer.out_dim()})));
    if (next_adapter < adapters_.size() - 1 && adapters_[next_adapter].layer == l) {
      const auto& a = adapters_[next_adapter++];
      NodeId down = parameter_node(graph, params_, a.down_name(), mode);
      NodeId up = parameter_node(graph, params_, a.up_name(), mode);
      z = graph.add(z, lora_term(graph, h, down, up, s));
    }
    h = layer.activation == Activation::Identity ? z : graph.activation(layer.activation, z);
  }
  NodeId down = parameter_node(graph, params_, head.down_name(), mode);
  NodeId up = parameter_node(graph, params_, head.up_name(), mode);
  return lora_term(graph, graph.append_ones_column(h), down, up, s);
}

double NoiseHypernetwork::lipschitz_upper_bound() const {
  const auto& layers = backbone_->layers();
  const double s = scale();
  const auto& head = adapters_.back();
  double bound = 1.0;
  std::size_t next_adapter = 0;
  for (std::size_t l = 0; l < head.layer; ++l) {
    Tensor w = layers[l].weight;
    if (next_adapter < adapters_.size() - 1 && adapters_[next_adapter].layer == l) {
      const auto& a = adapters_[next_adapter++];
      Tensor delta = linalg::matmul(params_.at(a.up_name()), params_.at(a.down_name()));
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += s * delta[i];
    }
    bound *= activation_slope_bound(layers[l].activation) *
             linalg::spectral_norm(w, kSpectralIters, derive_seed(0x5eedULL, l)) * kLipschitzSafety;
  }
  Tensor head_map = linalg::matmul(params_.at(head.up_name()), params_.at(head.down_name()));
  // Drop the constant column: it shifts f but does not affect its Lipschitz constant.
  Tensor jac = Tensor::zeros(head_map.rows(), head.in_dim);
  for (std::size_t i = 0; i < head_map.rows(); ++i) {
    for (std::size_t j = 0; j < head.in_dim; ++j) jac(i, j) = s * head_map(i, j);
  }
  bound *= linalg::spectral_norm(jac, kSpectralIters, derive_seed(0x5eedULL, head.layer)) * kLipschitzSafety;
  return bound;
}

NoiseHypernetwork init_hypernet(std::shared_ptr<const Generator> backbone, std::size_t rank, double lora_alpha,
                                std::uint64_t seed, bool adapt_hidden) {
  if (!backbone) throw StateError("init_hypernet: null backbone");
  if (rank == 0) throw DomainError("init_hypernet: rank must be >= 1");
  const auto& layers = backbone->layers();
  std::vector<LoraAdapter> adapters;
  const std::size_t head_layer = layers.size() - 1;
  if (adapt_hidden) {
    for (std::size_t l = 0; l < head_layer; ++l) {
      LoraAdapter a;
      a.name = "hidden" + std::to_string(l);
      a.layer = l;
      a.in_dim = layers[l].in_dim();
      a.out_dim = layers[l].out_dim();
      a.rank = rank;
      adapters.push_back(a);
    }
  }
  LoraAdapter head;
  head.name = "head";
  head.layer = head_layer;
  head.in_dim = layers[head_layer].in_dim();
  head.out_dim = backbone->latent_dim();
  head.rank = rank;
  head.augmented = true;
  head.is_head = true;
  adapters.push_back(head);

  for (const auto& a : adapters) {
    const std::size_t limit = std::min(a.out_dim, a.down_cols());
    if (rank > limit) {
      throw DomainError("init_hypernet: rank " + std::to_string(rank) + " exceeds min(m, n) = " +
                        std::to_string(limit) + " for adapter '" + a.name + "'");
    }
  }

  Rng rng(derive_seed(seed, "hypernet"));
  ParameterSet params;
  for (const auto& a : adapters) {
    params[a.down_name()] = rng.normal_matrix(a.rank, a.down_cols(), 1.0 / std::sqrt(double(a.down_cols())));
    params[a.up_name()] = Tensor::zeros(a.out_dim, a.rank);
  }
  return NoiseHypernetwork(std::move(backbone), std::move(adapters), lora_alpha, std::move(params));
}

double lipschitz_lower_bound(const NoiseHypernetwork& hn, std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs == 0) throw DomainError("lipschitz_lower_bound: n_pairs must be >= 1");
  const std::size_t d = hn.latent_dim();
  Rng rng(seed);
  Tensor x = rng.normal_matrix(n_pairs, d);
  Tensor y = x;
  // Alternate distant pairs with close pairs that probe the local slope.
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const double radius = (i % 2 == 0) ? 1.0 : 1e-3;
    for (std::size_t j = 0; j < d; ++j) y(i, j) = x(i, j) + radius * rng.normal();
  }
  std::optional<Tensor> c;
  if (hn.condition_dim() > 0) c = Tensor::zeros(n_pairs, hn.condition_dim());
  const Tensor fx = hn.perturbation_batch(x, c);
  const Tensor fy = hn.perturbation_batch(y, c);
  double best = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      num += (fx(i, j) - fy(i, j)) * (fx(i, j) - fy(i, j));
      den += (x(i, j) - y(i, j)) * (x(i, j) - y(i, j));
    }
    if (den > 0.0) best = std::max(best, std::sqrt(num / den));
  }
  return best;
}

void randomize_with_lipschitz_budget(NoiseHypernetwork& hn, double budget, std::uint64_t seed) {
  if (!(budget > 0.0)) throw DomainError("randomize_with_lipschitz_budget: budget must be > 0");
  Rng rng(derive_seed(seed, "lipschitz-budget"));
  ParameterSet params = hn.parameters();
  for (const auto& a : hn.adapters()) {
    auto& up = params[a.up_name()];
    up = rng.normal_matrix(up.rows(), up.cols(), a.is_head ? 1.0 : 0.3);
  }
  hn.set_parameters(params);
  const double current = hn.lipschitz_upper_bound();
  if (!(current > 0.0)) throw DomainError("randomize_with_lipschitz_budget: degenerate network");
  auto& head_up = params[hn.adapters().back().up_name()];
  for (auto& v : head_up.data()) v *= budget / current;
  hn.set_parameters(std::move(params));
}

}  // namespace hypernoise
