#include "hypernoise/baselines.hpp"

#include <chrono>
#include <cmath>

#include "hypernoise/errors.hpp"
#include "hypernoise/linalg.hpp"
#include "hypernoise/rng.hpp"

namespace hypernoise {

// ---------------------------------------------------------------- noise optimization

void NoiseOptConfig::validate() const {
  if (steps == 0) throw ConfigError("noise_opt: steps must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("noise_opt: learning_rate must be > 0");
  if (!(reg_weight >= 0.0) || !std::isfinite(reg_weight)) throw ConfigError("noise_opt: reg_weight must be >= 0");
}

NoiseOptResult noise_opt(const Generator& g, const Reward& r, const Tensor& x0_init, const NoiseOptConfig& cfg,
                         const std::optional<Tensor>& condition) {
  cfg.validate();
  const std::size_t d = g.latent_dim();
  if (x0_init.size() != d) throw ShapeError("noise_opt: x0_init must have latent_dim entries");
  if ((g.condition_dim() > 0) != condition.has_value()) {
    throw ShapeError("noise_opt: condition must be given iff the generator is conditional");
  }

  Graph graph;
  NodeId x = graph.input("x0", true);
  std::optional<NodeId> c;
  if (condition) c = graph.input("c", false);
  graph.set_root(r.build(graph, g.build(graph, x, c), g.output_dim()));
  Bindings b;
  if (condition) b["c"] = condition->reshaped(Shape{1, condition->size()});

  Tensor cur = x0_init.reshaped(Shape{1, d});
  auto evaluate = [&](const Tensor& at, double& reward, Tensor& grad) {
    b["x0"] = at;
    reward = graph.forward(b).item();
    grad = graph.backward().at("x0");
  };
  auto objective_of = [&](const Tensor& at, double reward) {
    double sq = 0.0;
    for (double v : at.data()) sq += v * v;
    return reward - 0.5 * cfg.reg_weight * sq;
  };

  NoiseOptResult out;
  double reward = 0.0;
  Tensor grad;
  evaluate(cur, reward, grad);
  double best = objective_of(cur, reward);
  Tensor best_x = cur;
  if (!std::isfinite(best)) throw NumericalError("noise_opt: non-finite objective at the initial point", 0);

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    Tensor next = cur;
    for (std::size_t j = 0; j < d; ++j) next[j] += cfg.learning_rate * (grad[j] - cfg.reg_weight * cur[j]);
    evaluate(next, reward, grad);
    const double obj = objective_of(next, reward);
    if (!std::isfinite(obj) || !grad.all_finite()) {
      out.aborted = true;
      break;
    }
    out.rewards.push_back(reward);
    out.objectives.push_back(obj);
    cur = std::move(next);
    if (obj > best) {
      best = obj;
      best_x = cur;
    }
  }
  out.x0_star = (out.aborted ? best_x : cur).reshaped(x0_init.shape());
  return out;
}

std::vector<NoiseOptResult> noise_opt_batch(const Generator& g, const Reward& r, const Tensor& x0_init,
                                            const NoiseOptConfig& cfg, const std::optional<Tensor>& conditions) {
  const std::size_t n = x0_init.rows();
  if (conditions && conditions->rows() != n) throw ShapeError("noise_opt_batch: one condition row per noise row");
  std::vector<NoiseOptResult> out(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      std::optional<Tensor> c;
      if (conditions) c = conditions->row_block(i, i + 1).reshaped(Shape{conditions->cols()});
      out[i] = noise_opt(g, r, x0_init.row_block(i, i + 1).reshaped(Shape{x0_init.cols()}), cfg, c);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) throw Error("noise_opt row " + std::to_string(i) + ": " + errors[i]);
  }
  return out;
}

// ---------------------------------------------------------------- best of n

BestOfNResult best_of_n(const Generator& g, const Reward& r, std::size_t n, std::uint64_t seed,
                        const std::optional<Tensor>& condition) {
  if (n == 0) throw DomainError("best_of_n: n must be >= 1");
  Rng rng(derive_seed(seed, "best-of-n"));
  const Tensor x0 = rng.normal_matrix(n, g.latent_dim());
  std::optional<Tensor> c;
  if (condition) {
    c = Tensor::zeros(n, condition->size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < condition->size(); ++j) (*c)(i, j) = (*condition)[j];
    }
  }
  const Tensor y = g.generate_batch(x0, c);
  BestOfNResult out;
  out.rewards = r.evaluate_batch(y);
  for (std::size_t i = 1; i < n; ++i) {
    if (out.rewards[i] > out.rewards[out.best_index]) out.best_index = i;
  }
  out.best_reward = out.rewards[out.best_index];
  out.best_noise = x0.row_block(out.best_index, out.best_index + 1).reshaped(Shape{g.latent_dim()});
  out.best_sample = y.row_block(out.best_index, out.best_index + 1).reshaped(Shape{g.output_dim()});
  return out;
}

// ---------------------------------------------------------------- adapted generator

namespace {

std::string layer_param(std::size_t l, const char* part) { return "layer" + std::to_string(l) + "." + part; }

}  // namespace

AdaptedGenerator::AdaptedGenerator(std::shared_ptr<const Generator> base, std::size_t rank, double lora_alpha,
                                   bool adapt_bias, std::uint64_t seed)
    : base_(std::move(base)), rank_(rank), lora_alpha_(lora_alpha), adapt_bias_(adapt_bias) {
  if (!base_) throw StateError("adapted generator: null base");
  if (rank_ == 0 && !adapt_bias_) throw DomainError("adapted generator: nothing to adapt (rank 0 and no bias)");
  if (rank_ > 0 && !(lora_alpha_ > 0.0)) throw DomainError("adapted generator: lora alpha must be > 0");
  Rng rng(derive_seed(seed, "direct-ft"));
  const auto& layers = base_->layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (rank_ > 0) {
      if (rank_ > std::min(layer.in_dim(), layer.out_dim())) {
        throw DomainError("adapted generator: rank " + std::to_string(rank_) + " exceeds min(m, n) of layer " +
                          std::to_string(l));
      }
      params_[layer_param(l, "down")] =
          rng.normal_matrix(rank_, layer.in_dim(), 1.0 / std::sqrt(double(layer.in_dim())));
      params_[layer_param(l, "up")] = Tensor::zeros(layer.out_dim(), rank_);
    }
    if (adapt_bias_) params_[layer_param(l, "bias")] = Tensor::zeros(1, layer.out_dim());
  }
}

void AdaptedGenerator::set_parameters(ParameterSet params) {
  if (params.size() != params_.size()) throw StateError("adapted generator: parameter manifest mismatch");
  for (const auto& [name, t] : params_) {
    auto it = params.find(name);
    if (it == params.end() || it->second.shape() != t.shape()) {
      throw ShapeError("adapted generator: parameter '" + name + "' missing or misshapen");
    }
  }
  params_ = std::move(params);
}

NodeId AdaptedGenerator::build(Graph& graph, NodeId x0, std::optional<NodeId> condition, ParamMode mode,
                               std::size_t steps) const {
  // Parameter nodes are created once and shared by every network call of a multi-step schedule.
  std::map<std::string, NodeId> nodes;
  for (const auto& [name, t] : params_) nodes[name] = parameter_node(graph, params_, name, mode);
  const double s = scale();
  LayerHook hook = [&](Graph& gr, std::size_t l, NodeId input, NodeId pre) {
    NodeId z = pre;
    if (rank_ > 0) {
      z = gr.add(z, lora_term(gr, input, nodes.at(layer_param(l, "down")), nodes.at(layer_param(l, "up")), s));
    }
    if (adapt_bias_) z = gr.add(z, nodes.at(layer_param(l, "bias")));
    return z;
  };
  return base_->build(graph, x0, condition, steps, hook);
}

Generator AdaptedGenerator::materialize() const {
  std::vector<DenseLayer> layers = base_->layers();
  const double s = scale();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (rank_ > 0) {
      const Tensor delta = linalg::matmul(params_.at(layer_param(l, "up")), params_.at(layer_param(l, "down")));
      for (std::size_t i = 0; i < delta.size(); ++i) layers[l].weight[i] += s * delta[i];
    }
    if (adapt_bias_) {
      const Tensor& db = params_.at(layer_param(l, "bias"));
      for (std::size_t i = 0; i < db.size(); ++i) layers[l].bias[i] += db[i];
    }
  }
  return Generator(base_->spec(), std::move(layers));
}

Tensor AdaptedGenerator::generate_batch(const Tensor& x0, const std::optional<Tensor>& conditions,
                                        std::size_t steps) const {
  return materialize().generate_batch(x0, conditions, steps);
}

double AdaptedGenerator::drift() const {
  double sq = 0.0;
  const double s = scale();
  for (std::size_t l = 0; l < base_->layers().size(); ++l) {
    if (rank_ > 0) {
      const Tensor delta = linalg::matmul(params_.at(layer_param(l, "up")), params_.at(layer_param(l, "down")));
      for (double v : delta.data()) sq += s * s * v * v;
    }
    if (adapt_bias_) {
      for (double v : params_.at(layer_param(l, "bias")).data()) sq += v * v;
    }
  }
  return std::sqrt(sq);
}

// ---------------------------------------------------------------- direct fine-tuning

void DirectFinetuneConfig::validate() const {
  if (steps == 0) throw ConfigError("steps must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  optimizer.validate();
  if (!(grad_norm_clip > 0.0)) throw ConfigError("grad_norm_clip must be > 0");
  if (rank == 0 && !adapt_bias) throw ConfigError("direct fine-tuning needs rank >= 1 or adapt_bias");
  if (rank > 0 && !(lora_alpha > 0.0)) throw ConfigError("lora_alpha must be > 0");
  if (log_every == 0) throw ConfigError("log_every must be >= 1");
}

DirectFinetuneResult train_direct_finetune(std::shared_ptr<const Generator> g, const Reward& r,
                                           const DirectFinetuneConfig& cfg, const FinetuneOptions& options) {
  cfg.validate();
  const Generator& base = *g;
  const std::size_t d = base.latent_dim();
  if (options.conditions) {
    if (options.conditions->empty()) throw ConfigError("condition set is empty");
  } else if (base.condition_dim() > 0) {
    throw ConfigError("conditional generator needs a condition set");
  }

  AdaptedGenerator adapted(g, cfg.rank, cfg.lora_alpha, cfg.adapt_bias, cfg.seed);
  Graph graph;
  NodeId x0 = graph.input("x0", false);
  std::optional<NodeId> c;
  if (base.condition_dim() > 0) c = graph.input("c", false);
  const NodeId rewards = r.build(graph, adapted.build(graph, x0, c, ParamMode::Trainable), base.output_dim());
  graph.set_root(graph.scale(graph.sum(rewards), -1.0 / static_cast<double>(cfg.batch_size)));

  Optimizer opt(cfg.optimizer);
  Rng noise_rng(derive_seed(cfg.seed, "train-noise"));
  Rng cond_rng(derive_seed(cfg.seed, "train-conditions"));
  const auto t0 = std::chrono::steady_clock::now();
  DirectFinetuneResult out{adapted, {}, TrainStatus::Completed, {}, 0};
  ParameterSet params = adapted.parameters();
  std::size_t last_eval = 0;

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    Bindings b = params;
    b["x0"] = noise_rng.normal_matrix(cfg.batch_size, d);
    if (options.conditions) {
      const auto& set = *options.conditions;
      Tensor ct = Tensor::zeros(cfg.batch_size, base.condition_dim());
      for (std::size_t i = 0; i < cfg.batch_size; ++i) {
        const auto& pick = set[cond_rng.index(set.size())];
        for (std::size_t j = 0; j < base.condition_dim(); ++j) ct(i, j) = pick[j];
      }
      b["c"] = std::move(ct);
    }
    const double loss = graph.forward(b).item();
    if (!std::isfinite(loss)) {
      out.status = TrainStatus::NonFiniteLoss;
      out.message = "step " + std::to_string(step) + ": non-finite reward";
      break;
    }
    ParameterSet grads;
    for (auto& [name, t] : graph.backward()) grads[name] = std::move(t);
    if (!all_finite(grads)) {
      out.status = TrainStatus::NonFiniteLoss;
      out.message = "step " + std::to_string(step) + ": non-finite gradient";
      break;
    }
    const double gnorm = clip_global_norm(grads, cfg.grad_norm_clip);
    ParameterSet next = params;
    opt.step(next, grads);
    if (!all_finite(next)) {
      out.status = TrainStatus::NonFiniteLoss;
      out.message = "step " + std::to_string(step) + ": optimizer produced non-finite parameters";
      break;
    }
    params = std::move(next);
    adapted.set_parameters(params);
    out.steps_completed = step;

    if (step == 1 || step % cfg.log_every == 0 || step == cfg.steps) {
      DirectFinetuneRow row;
      row.step = step;
      row.reward_mean = -loss;
      row.grad_norm = gnorm;
      row.drift = adapted.drift();
      if (options.record_time) {
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      out.history.push_back(row);
    }
    if (options.on_eval && options.eval_every > 0 && step % options.eval_every == 0) {
      options.on_eval(step, adapted);
      last_eval = step;
    }
  }
  if (options.on_eval && out.steps_completed > 0 && last_eval != out.steps_completed) {
    options.on_eval(out.steps_completed, adapted);
  }
  out.generator = std::move(adapted);
  return out;
}

}  // namespace hypernoise
