#include "hypernoise/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hypernoise/errors.hpp"
#include "hypernoise/format.hpp"
#include "hypernoise/objectives.hpp"
#include "hypernoise/rng.hpp"

namespace hypernoise {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd, adam)");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Optimizer::step(ParameterSet& params, const ParameterSet& grads) {
  ++t_;
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const auto g = git->second.data();
    auto w = p.data();
    if (cfg_.kind == OptimizerKind::Sgd) {
      if (cfg_.momentum == 0.0) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg_.learning_rate * g[i];
        continue;
      }
      auto [it, fresh] = m_.try_emplace(name, Tensor(p.shape(), 0.0));
      auto m = it->second.data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg_.momentum * m[i] + g[i];
        w[i] -= cfg_.learning_rate * m[i];
      }
      continue;
    }
    auto m = m_.try_emplace(name, Tensor(p.shape(), 0.0)).first->second.data();
    auto v = v_.try_emplace(name, Tensor(p.shape(), 0.0)).first->second.data();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
    }
  }
}

double clip_global_norm(ParameterSet& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto& [name, t] : grads) {
      for (auto& v : t.data()) v *= f;
    }
  }
  return norm;
}

void TrainConfig::validate() const {
  if (steps == 0) throw ConfigError("steps must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  optimizer.validate();
  if (!(grad_norm_clip > 0.0)) throw ConfigError("grad_norm_clip must be > 0");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be > 0");
  if (rank == 0) throw ConfigError("rank must be >= 1");
  if (!(lora_alpha > 0.0)) throw ConfigError("lora_alpha must be > 0");
  if (log_every == 0) throw ConfigError("log_every must be >= 1");
  if (l2_ceiling && !(*l2_ceiling > 0.0)) throw ConfigError("l2_ceiling must be > 0");
}

std::string TrainHistory::to_csv() const {
  std::ostringstream os;
  os << "step,l2_term,reward_term,total_loss,grad_norm,lipschitz_audit,wall_time\n";
  for (const auto& r : rows) {
    os << r.step << ',' << format_number(r.l2_term) << ',' << format_number(r.reward_term) << ','
       << format_number(r.total_loss) << ',' << format_number(r.grad_norm) << ',' << format_number(r.lipschitz_audit)
       << ',' << format_number(r.wall_time) << '\n';
  }
  return os.str();
}

std::string to_string(TrainStatus s) {
  switch (s) {
    case TrainStatus::Completed: return "completed";
    case TrainStatus::NonFiniteLoss: return "non_finite_loss";
    case TrainStatus::RegularizationBreach: return "regularization_breach";
  }
  return "?";
}

TrainResult train_hypernoise(std::shared_ptr<const Generator> g, const Reward& r, const TrainConfig& cfg,
                             const TrainOptions& options) {
  cfg.validate();
  return train_hypernoise(init_hypernet(std::move(g), cfg.rank, cfg.lora_alpha, cfg.seed, cfg.adapt_hidden), r, cfg,
                          options);
}

TrainResult train_hypernoise(NoiseHypernetwork hn, const Reward& r, const TrainConfig& cfg,
                             const TrainOptions& options) {
  cfg.validate();
  const Generator& g = hn.backbone();
  const std::size_t d = g.latent_dim();
  if (options.conditions) {
    if (options.conditions->empty()) throw ConfigError("condition set is empty");
    for (const auto& c : *options.conditions) {
      if (c.size() != g.condition_dim()) throw ShapeError("condition length does not match the generator");
    }
  } else if (g.condition_dim() > 0) {
    throw ConfigError("conditional generator needs a condition set");
  }
  const double ceiling = cfg.l2_ceiling.value_or(10.0 * static_cast<double>(d));

  HypernoiseLoss loss(hn, g, r, cfg.alpha, cfg.batch_size);
  Optimizer opt(cfg.optimizer);
  Rng noise_rng(derive_seed(cfg.seed, "train-noise"));
  Rng cond_rng(derive_seed(cfg.seed, "train-conditions"));
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult out{hn, {}, TrainStatus::Completed, {}, 0};
  ParameterSet params = hn.parameters();
  ParameterSet last_good = params;  // last parameters whose loss passed every check
  std::size_t last_eval = 0;

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const Tensor x0 = noise_rng.normal_matrix(cfg.batch_size, d);
    std::optional<Tensor> c;
    if (options.conditions) {
      const auto& set = *options.conditions;
      c = Tensor::zeros(cfg.batch_size, g.condition_dim());
      for (std::size_t i = 0; i < cfg.batch_size; ++i) {
        const auto& pick = set[cond_rng.index(set.size())];
        for (std::size_t j = 0; j < g.condition_dim(); ++j) (*c)(i, j) = pick[j];
      }
    }

    LossResult res;
    try {
      res = loss.evaluate(params, x0, c);
    } catch (const NumericalError& e) {
      out.status = TrainStatus::NonFiniteLoss;
      out.message = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
    if (!std::isfinite(res.breakdown.total) || !all_finite(res.gradients)) {
      out.status = TrainStatus::NonFiniteLoss;
      out.message = "step " + std::to_string(step) + ": non-finite loss or gradient";
      break;
    }
    if (res.breakdown.l2_term > ceiling) {
      out.status = TrainStatus::RegularizationBreach;
      out.message = "step " + std::to_string(step) + ": l2_term " + format_number(res.breakdown.l2_term) +
                    " exceeds ceiling " + format_number(ceiling);
      break;
    }
    last_good = params;
    const double gnorm = clip_global_norm(res.gradients, cfg.grad_norm_clip);
    // finite entries can still overflow the squared norm; clipping by inf would zero the step
    if (!std::isfinite(gnorm)) {
      out.status = TrainStatus::NonFiniteLoss;
      out.message = "step " + std::to_string(step) + ": gradient norm overflowed";
      break;
    }

    if (step == 1 || step % cfg.log_every == 0 || step == cfg.steps) {
      TrainHistoryRow row;
      row.step = step;
      row.l2_term = res.breakdown.l2_term;
      row.reward_term = res.breakdown.reward_term;
      row.total_loss = res.breakdown.total;
      row.grad_norm = gnorm;
      row.lipschitz_audit = lipschitz_lower_bound(hn, cfg.lipschitz_pairs, derive_seed(cfg.seed, "lipschitz-audit"));
      if (options.record_time) {
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      out.history.rows.push_back(row);
    }

    ParameterSet next = params;
    opt.step(next, res.gradients);
    if (!all_finite(next)) {
      out.status = TrainStatus::NonFiniteLoss;
      out.message = "step " + std::to_string(step) + ": optimizer produced non-finite parameters";
      break;
    }
    params = std::move(next);
    hn.set_parameters(params);
    out.steps_completed = step;

    if (options.on_eval && options.eval_every > 0 && step % options.eval_every == 0) {
      options.on_eval(step, hn);
      last_eval = step;
    }
    if (cfg.checkpoint_path && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      save_checkpoint(hn, *cfg.checkpoint_path);
    }
  }

  if (options.on_eval && out.steps_completed > 0 && last_eval != out.steps_completed) {
    options.on_eval(out.steps_completed, hn);
  }
  if (out.status != TrainStatus::Completed) hn.set_parameters(last_good);
  if (cfg.checkpoint_path && out.status == TrainStatus::Completed) save_checkpoint(hn, *cfg.checkpoint_path);
  out.hn = std::move(hn);
  return out;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[4] = {'H', 'N', 'C', 'K'};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw CheckpointError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + tmp.string() + "' for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const NoiseHypernetwork& hn, const std::filesystem::path& path) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, hn.backbone().fingerprint());
  put_u32(out, static_cast<std::uint32_t>(hn.rank()));
  put_f64(out, hn.lora_alpha());
  put_u32(out, hn.adapters().size() > 1 ? 1u : 0u);

  std::vector<std::string> manifest;
  for (const auto& a : hn.adapters()) {
    manifest.push_back(a.down_name());
    manifest.push_back(a.up_name());
  }
  put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  for (const auto& name : manifest) {
    const Tensor& t = hn.parameters().at(name);
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rows()));
    put_u32(out, static_cast<std::uint32_t>(t.cols()));
  }
  for (const auto& name : manifest) {
    for (double v : hn.parameters().at(name).data()) put_f64(out, v);
  }
  put_u64(out, fnv1a(out));
  write_file_atomic(path, out);
}

NoiseHypernetwork load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const Generator> g) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string data = ss.str();
  if (data.size() < 12 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw CheckpointError("checkpoint: '" + path.string() + "' is not a hypernetwork checkpoint");
  }
  {
    Reader tail(data);
    tail.bytes(data.size() - 8);
    if (tail.u64() != fnv1a(data.substr(0, data.size() - 8))) throw CheckpointError("checkpoint: checksum mismatch");
  }
  Reader rd(data);
  rd.bytes(4);
  const auto version = rd.u32();
  if (version != kCheckpointVersion) throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  const auto fingerprint = rd.u64();
  if (fingerprint != g->fingerprint()) {
    throw CheckpointError("checkpoint: generator fingerprint mismatch (checkpoint was trained on another backbone)");
  }
  const auto rank = rd.u32();
  const double lora_alpha = rd.f64();
  const bool adapt_hidden = rd.u32() != 0;
  const auto count = rd.u32();
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> manifest;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = rd.u32();
    std::string name = rd.bytes(len);
    const std::size_t rows = rd.u32();
    const std::size_t cols = rd.u32();
    if (rows == 0 || cols == 0) throw CheckpointError("checkpoint: empty matrix '" + name + "'");
    manifest.emplace_back(std::move(name), rows, cols);
  }
  ParameterSet params;
  for (const auto& [name, rows, cols] : manifest) {
    std::vector<double> values(rows * cols);
    for (auto& v : values) v = rd.f64();
    params[name] = Tensor(Shape{rows, cols}, std::move(values));
  }
  if (rd.pos() + 8 != data.size()) throw CheckpointError("checkpoint: trailing bytes after data");

  try {
    NoiseHypernetwork hn = init_hypernet(std::move(g), rank, lora_alpha, 0, adapt_hidden);
    hn.set_parameters(std::move(params));
    return hn;
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint: manifest does not match the generator: ") + e.what());
  }
}

}  // namespace hypernoise
