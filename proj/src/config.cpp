#include "hypernoise/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hypernoise/errors.hpp"
#include "hypernoise/format.hpp"
#include "hypernoise/rng.hpp"

namespace hypernoise {

std::string to_string(Method m) {
  switch (m) {
    case Method::Hypernoise: return "hypernoise";
    case Method::DirectFt: return "direct_ft";
    case Method::NoiseOpt: return "noise_opt";
    case Method::BestOfN: return "best_of_n";
  }
  return "?";
}

std::string to_string(FidelityMetric f) {
  return f == FidelityMetric::KnnKl ? "knn_kl" : "closed_form_gaussian_kl";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

// One [section] of the file. Every getter marks its key as used so leftovers
// can be reported as unknown.
class Section {
 public:
  Section(std::string name, std::map<std::string, std::string> values)
      : name_(std::move(name)), values_(std::move(values)) {}

  const std::string& name() const { return name_; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> raw(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError("[" + name_ + "] " + key + ": " + msg);
  }

  void get(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = *v;
  }

  void get(const std::string& key, std::size_t& out) {
    if (auto v = raw(key)) out = parse_uint(key, *v);
  }

  void get(const std::string& key, double& out) {
    if (auto v = raw(key)) out = parse_double(key, *v);
  }

  void get(const std::string& key, bool& out) {
    if (auto v = raw(key)) {
      if (*v == "true") out = true;
      else if (*v == "false") out = false;
      else fail(key, "expected true or false, got '" + *v + "'");
    }
  }

  void get(const std::string& key, std::vector<double>& out) {
    if (auto v = raw(key)) out = parse_doubles(key, *v);
  }

  void get(const std::string& key, std::vector<std::size_t>& out) {
    if (auto v = raw(key)) {
      out.clear();
      if (v->empty()) return;
      for (const auto& item : split(*v, ',')) out.push_back(parse_uint(key, item));
    }
  }

  void get(const std::string& key, std::vector<std::vector<double>>& out) {
    if (auto v = raw(key)) out = parse_rows(key, *v);
  }

  std::uint64_t parse_uint(const std::string& key, const std::string& text) const {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end) fail(key, "expected a non-negative integer, got '" + text + "'");
    return v;
  }

  double parse_double(const std::string& key, const std::string& text) const {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
      fail(key, "expected a finite number, got '" + text + "'");
    return v;
  }

  std::vector<double> parse_doubles(const std::string& key, const std::string& text) const {
    std::vector<double> out;
    if (text.empty()) return out;
    for (const auto& item : split(text, ',')) out.push_back(parse_double(key, item));
    return out;
  }

  std::vector<std::vector<double>> parse_rows(const std::string& key, const std::string& text) const {
    std::vector<std::vector<double>> rows;
    if (text.empty()) return rows;
    for (const auto& row : split(text, ';')) {
      rows.push_back(parse_doubles(key, row));
      if (rows.back().empty()) fail(key, "empty matrix row");
      if (rows.back().size() != rows.front().size()) fail(key, "matrix rows have different lengths");
    }
    return rows;
  }

  void finish() const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) throw ConfigError("[" + name_ + "] unknown key '" + k + "'");
  }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) { return Tensor::from_rows(rows); }

std::vector<std::vector<double>> tensor_rows(const Tensor& t) {
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) rows.emplace_back(t.row(r).begin(), t.row(r).end());
  return rows;
}

void read_reward_fields(Section& s, RewardConfig& rc) {
  s.get("kind", rc.kind);
  s.get("c", rc.c);
  s.get("q", rc.q);
  s.get("sign", rc.sign);
  s.get("scale", rc.scale);
}

std::string join_numbers(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_number(v[i]);
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

std::string join_rows(const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) out += (i ? "; " : "") + join_numbers(rows[i]);
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

void write_reward_fields(std::ostringstream& out, const RewardConfig& rc) {
  out << "kind = " << rc.kind << "\n";
  out << "c = " << join_numbers(rc.c) << "\n";
  out << "q = " << join_rows(rc.q) << "\n";
  out << "sign = " << format_number(rc.sign) << "\n";
  out << "scale = " << format_number(rc.scale) << "\n";
}

void validate_reward(const RewardConfig& rc, std::size_t output_dim, const std::string& where, bool nested) {
  auto fail = [&](const std::string& msg) { throw ConfigError("[" + where + "] " + msg); };
  if (rc.kind == "linear") {
    if (rc.c.size() != output_dim)
      fail("c: linear reward needs " + std::to_string(output_dim) + " entries (the generator output dimension), got " +
           std::to_string(rc.c.size()));
  } else if (rc.kind == "quadratic") {
    if (rc.q.size() != output_dim)
      fail("q: quadratic reward needs a " + std::to_string(output_dim) + "x" + std::to_string(output_dim) + " matrix");
    for (const auto& row : rc.q)
      if (row.size() != output_dim) fail("q: quadratic reward matrix must be square");
  } else if (rc.kind == "redness") {
    if (output_dim % 3 != 0) fail("kind: redness reward needs an image output (H*W*3 values)");
  } else if (rc.kind == "zero") {
  } else if (rc.kind == "composite") {
    if (nested) fail("kind: composite parts cannot themselves be composite");
    if (rc.parts.empty()) fail("parts: composite reward needs at least one part");
    for (const auto& [name, part] : rc.parts) validate_reward(part, output_dim, "reward." + name, true);
  } else {
    fail("kind: unknown reward '" + rc.kind + "' (expected linear, quadratic, redness, composite, zero)");
  }
  if (!std::isfinite(rc.weight)) fail("weight: must be finite");
}

}  // namespace

Reward make_reward(const RewardConfig& rc, std::size_t output_dim) {
  validate_reward(rc, output_dim, "reward", false);
  if (rc.kind == "linear") return Reward::linear(Tensor::vector(rc.c));
  if (rc.kind == "quadratic") return Reward::quadratic(Tensor::from_rows(rc.q), rc.sign);
  if (rc.kind == "redness") return Reward::redness(rc.scale);
  if (rc.kind == "zero") return Reward::zero(output_dim);
  std::vector<std::pair<Reward, double>> parts;
  for (const auto& [name, part] : rc.parts) parts.emplace_back(make_reward(part, output_dim), part.weight);
  return Reward::composite(std::move(parts));
}

ExperimentConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config syntax error at line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::map<std::string, Section> sections;
  for (const auto& [name, child] : tree) {
    if (child.empty() && !child.data().empty())
      throw ConfigError("key '" + name + "' appears outside any [section]");
    std::map<std::string, std::string> values;
    for (const auto& [key, leaf] : child) {
      if (!leaf.empty()) throw ConfigError("[" + name + "] " + key + ": nested keys are not supported");
      values[key] = trim(leaf.data());
    }
    sections.emplace(name, Section(name, std::move(values)));
  }

  ExperimentConfig cfg;
  std::set<std::string> consumed;
  auto section = [&](const std::string& name) -> Section* {
    auto it = sections.find(name);
    if (it == sections.end()) return nullptr;
    consumed.insert(name);
    return &it->second;
  };

  if (auto* s = section("run")) {
    std::string method = to_string(cfg.method);
    s->get("method", method);
    if (method == "hypernoise") cfg.method = Method::Hypernoise;
    else if (method == "direct_ft") cfg.method = Method::DirectFt;
    else if (method == "noise_opt") cfg.method = Method::NoiseOpt;
    else if (method == "best_of_n") cfg.method = Method::BestOfN;
    else s->fail("method", "unknown method '" + method + "' (expected hypernoise, direct_ft, noise_opt, best_of_n)");
    s->get("seed", cfg.seed);
    s->get("output_dir", cfg.output_dir);
    s->finish();
  }

  if (auto* s = section("generator")) {
    auto& g = cfg.generator;
    std::string kind = to_string(g.kind);
    s->get("kind", kind);
    try {
      g.kind = generator_kind_from_string(kind);
    } catch (const ConfigError& e) {
      s->fail("kind", e.what());
    }
    s->get("latent_dim", g.latent_dim);
    s->get("output_dim", g.output_dim);
    s->get("condition_dim", g.condition_dim);
    s->get("hidden", g.hidden);
    std::string act = to_string(g.activation);
    s->get("activation", act);
    try {
      g.activation = activation_from_string(act);
    } catch (const ConfigError& e) {
      s->fail("activation", e.what());
    }
    s->get("image_height", g.image_height);
    s->get("image_width", g.image_width);
    std::vector<std::vector<double>> matrix;
    s->get("affine_matrix", matrix);
    if (!matrix.empty()) g.affine_matrix = rows_to_tensor(matrix);
    std::vector<double> bias;
    s->get("affine_bias", bias);
    if (!bias.empty()) g.affine_bias = Tensor::vector(bias);
    s->get("bias_scale", g.bias_scale);
    s->get("schedule_blend", g.schedule.blend);
    s->get("schedule_shrink", g.schedule.shrink);
    s->finish();
  }

  if (auto* s = section("reward")) {
    read_reward_fields(*s, cfg.reward);
    std::string parts;
    s->get("parts", parts);
    if (!parts.empty()) {
      for (const auto& name : split(parts, ',')) {
        if (name.empty()) s->fail("parts", "empty part name");
        auto* ps = section("reward." + name);
        if (!ps) s->fail("parts", "part '" + name + "' has no [reward." + name + "] section");
        RewardConfig part;
        read_reward_fields(*ps, part);
        ps->get("weight", part.weight);
        ps->finish();
        cfg.reward.parts.emplace_back(name, std::move(part));
      }
    }
    s->finish();
  }

  if (auto* s = section("train")) {
    auto& t = cfg.train;
    s->get("steps", t.steps);
    s->get("batch_size", t.batch_size);
    std::string opt = to_string(t.optimizer.kind);
    s->get("optimizer", opt);
    try {
      t.optimizer.kind = optimizer_from_string(opt);
    } catch (const ConfigError& e) {
      s->fail("optimizer", e.what());
    }
    s->get("learning_rate", t.optimizer.learning_rate);
    s->get("momentum", t.optimizer.momentum);
    s->get("beta1", t.optimizer.beta1);
    s->get("beta2", t.optimizer.beta2);
    s->get("epsilon", t.optimizer.epsilon);
    s->get("grad_norm_clip", t.grad_norm_clip);
    s->get("alpha", t.alpha);
    s->get("rank", t.rank);
    s->get("lora_alpha", t.lora_alpha);
    s->get("adapt_hidden", t.adapt_hidden);
    s->get("adapt_bias", cfg.adapt_bias);
    s->get("log_every", t.log_every);
    s->get("checkpoint_every", t.checkpoint_every);
    if (auto v = s->raw("l2_ceiling")) {
      if (*v == "auto") t.l2_ceiling.reset();
      else t.l2_ceiling = s->parse_double("l2_ceiling", *v);
    }
    s->get("lipschitz_pairs", t.lipschitz_pairs);
    std::vector<std::vector<double>> conds;
    s->get("conditions", conds);
    for (const auto& row : conds) cfg.conditions.push_back(Tensor::vector(row));
    s->finish();
  }

  if (auto* s = section("baseline")) {
    auto& b = cfg.baseline;
    s->get("noise_opt_steps", b.noise_opt.steps);
    s->get("noise_opt_learning_rate", b.noise_opt.learning_rate);
    s->get("reg_weight", b.noise_opt.reg_weight);
    s->get("best_of_n", b.best_of_n);
    s->finish();
  }

  if (auto* s = section("eval")) {
    auto& e = cfg.eval;
    s->get("heldout", e.heldout);
    s->get("reference", e.reference);
    s->get("eval_every", e.eval_every);
    std::string fid = to_string(e.fidelity);
    s->get("fidelity", fid);
    if (fid == "knn_kl") e.fidelity = FidelityMetric::KnnKl;
    else if (fid == "closed_form_gaussian_kl") e.fidelity = FidelityMetric::GaussianKl;
    else s->fail("fidelity", "unknown metric '" + fid + "' (expected knn_kl, closed_form_gaussian_kl)");
    s->get("knn_k", e.knn_k);
    s->get("multistep", e.multistep);
    s->get("diversity_seeds", e.diversity_seeds);
    s->get("diversity_samples", e.diversity_samples);
    s->finish();
  }

  if (auto* s = section("theory")) {
    auto& t = cfg.theory;
    s->get("latent_dim", t.latent_dim);
    s->get("networks", t.networks);
    s->get("lipschitz_budgets", t.lipschitz_budgets);
    s->get("points_per_network", t.points_per_network);
    s->get("stein_dims", t.stein_dims);
    s->get("stein_networks", t.stein_networks);
    s->get("stein_samples", t.stein_samples);
    s->get("pushforward_samples", t.pushforward_samples);
    s->get("dpi_samples", t.dpi_samples);
    s->get("knn_k", t.knn_k);
    s->get("gradient_points", t.gradient_points);
    s->finish();
  }

  for (const auto& [name, sec] : sections)
    if (!consumed.count(name)) throw ConfigError("unknown section [" + name + "]");

  if (cfg.generator.kind == GeneratorKind::ImageDecoder)
    cfg.generator.output_dim = cfg.generator.image_height * cfg.generator.image_width * 3;
  if (cfg.generator.kind == GeneratorKind::Affine && cfg.generator.affine_matrix)
    cfg.generator.output_dim = cfg.generator.affine_matrix->rows();
  set_seed(cfg, cfg.seed);
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate(const ExperimentConfig& cfg) {
  const auto& g = cfg.generator;
  if (g.latent_dim == 0) throw ConfigError("[generator] latent_dim: must be >= 1");
  if (g.kind == GeneratorKind::ImageDecoder && (g.image_height == 0 || g.image_width == 0))
    throw ConfigError("[generator] image_height/image_width: image_decoder needs both");
  if (g.kind != GeneratorKind::ImageDecoder && g.output_dim == 0)
    throw ConfigError("[generator] output_dim: must be >= 1");
  if (g.affine_matrix && g.affine_matrix->cols() != g.latent_dim)
    throw ConfigError("[generator] affine_matrix: needs latent_dim columns");
  if (g.affine_bias && g.affine_bias->size() != g.output_dim)
    throw ConfigError("[generator] affine_bias: needs output_dim entries");
  if (!(g.schedule.blend > 0.0 && g.schedule.blend <= 1.0))
    throw ConfigError("[generator] schedule_blend: must lie in (0, 1]");
  if (g.schedule.shrink < 0.0) throw ConfigError("[generator] schedule_shrink: must be >= 0");
  if (g.bias_scale < 0.0) throw ConfigError("[generator] bias_scale: must be >= 0");

  validate_reward(cfg.reward, g.output_dim, "reward", false);

  try {
    // direct fine-tuning accepts rank 0 (bias deltas only)
    TrainConfig t = cfg.train;
    if (cfg.method == Method::DirectFt && t.rank == 0) t.rank = 1;
    t.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[train] ") + e.what());
  }
  if (g.condition_dim > 0 && cfg.conditions.empty())
    throw ConfigError("[train] conditions: conditional generator needs at least one condition row");
  if (g.condition_dim == 0 && !cfg.conditions.empty())
    throw ConfigError("[train] conditions: generator takes no condition");
  for (const auto& c : cfg.conditions)
    if (c.size() != g.condition_dim)
      throw ConfigError("[train] conditions: each row needs condition_dim = " + std::to_string(g.condition_dim) +
                        " entries");
  try {
    cfg.baseline.noise_opt.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[baseline] ") + e.what());
  }
  if (cfg.baseline.best_of_n == 0) throw ConfigError("[baseline] best_of_n: must be >= 1");

  const auto& e = cfg.eval;
  if (e.heldout < 2) throw ConfigError("[eval] heldout: must be >= 2");
  if (e.reference < 2) throw ConfigError("[eval] reference: must be >= 2");
  if (e.eval_every == 0) throw ConfigError("[eval] eval_every: must be >= 1");
  if (e.knn_k == 0) throw ConfigError("[eval] knn_k: must be >= 1");
  if (e.fidelity == FidelityMetric::KnnKl && (e.knn_k >= e.heldout || e.knn_k >= e.reference))
    throw ConfigError("[eval] knn_k: must be smaller than heldout and reference");
  if (e.fidelity == FidelityMetric::GaussianKl && g.output_dim > g.latent_dim)
    throw ConfigError("[eval] fidelity: closed_form_gaussian_kl needs output_dim <= latent_dim (a full-rank output law)");
  if (e.multistep.empty()) throw ConfigError("[eval] multistep: needs at least one step count");
  for (auto k : e.multistep)
    if (k == 0) throw ConfigError("[eval] multistep: step counts must be >= 1");
  if (e.diversity_seeds < 2) throw ConfigError("[eval] diversity_seeds: must be >= 2");
  if (e.diversity_samples < 2) throw ConfigError("[eval] diversity_samples: must be >= 2");

  try {
    cfg.theory.validate();
  } catch (const ConfigError& ex) {
    throw ConfigError(std::string("[theory] ") + ex.what());
  }
}

std::string to_ini(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[run]\n";
  out << "method = " << to_string(cfg.method) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "output_dir = " << cfg.output_dir << "\n";

  const auto& g = cfg.generator;
  out << "\n[generator]\n";
  out << "kind = " << to_string(g.kind) << "\n";
  out << "latent_dim = " << g.latent_dim << "\n";
  out << "output_dim = " << g.output_dim << "\n";
  out << "condition_dim = " << g.condition_dim << "\n";
  out << "hidden = " << join_sizes(g.hidden) << "\n";
  out << "activation = " << to_string(g.activation) << "\n";
  out << "image_height = " << g.image_height << "\n";
  out << "image_width = " << g.image_width << "\n";
  out << "affine_matrix = " << (g.affine_matrix ? join_rows(tensor_rows(*g.affine_matrix)) : "") << "\n";
  out << "affine_bias = " << (g.affine_bias ? join_numbers(g.affine_bias->values()) : "") << "\n";
  out << "bias_scale = " << format_number(g.bias_scale) << "\n";
  out << "schedule_blend = " << format_number(g.schedule.blend) << "\n";
  out << "schedule_shrink = " << format_number(g.schedule.shrink) << "\n";

  out << "\n[reward]\n";
  write_reward_fields(out, cfg.reward);
  std::string names;
  for (std::size_t i = 0; i < cfg.reward.parts.size(); ++i) names += (i ? ", " : "") + cfg.reward.parts[i].first;
  out << "parts = " << names << "\n";
  for (const auto& [name, part] : cfg.reward.parts) {
    out << "\n[reward." << name << "]\n";
    write_reward_fields(out, part);
    out << "weight = " << format_number(part.weight) << "\n";
  }

  const auto& t = cfg.train;
  out << "\n[train]\n";
  out << "steps = " << t.steps << "\n";
  out << "batch_size = " << t.batch_size << "\n";
  out << "optimizer = " << to_string(t.optimizer.kind) << "\n";
  out << "learning_rate = " << format_number(t.optimizer.learning_rate) << "\n";
  out << "momentum = " << format_number(t.optimizer.momentum) << "\n";
  out << "beta1 = " << format_number(t.optimizer.beta1) << "\n";
  out << "beta2 = " << format_number(t.optimizer.beta2) << "\n";
  out << "epsilon = " << format_number(t.optimizer.epsilon) << "\n";
  out << "grad_norm_clip = " << format_number(t.grad_norm_clip) << "\n";
  out << "alpha = " << format_number(t.alpha) << "\n";
  out << "rank = " << t.rank << "\n";
  out << "lora_alpha = " << format_number(t.lora_alpha) << "\n";
  out << "adapt_hidden = " << bool_text(t.adapt_hidden) << "\n";
  out << "adapt_bias = " << bool_text(cfg.adapt_bias) << "\n";
  out << "log_every = " << t.log_every << "\n";
  out << "checkpoint_every = " << t.checkpoint_every << "\n";
  out << "l2_ceiling = " << (t.l2_ceiling ? format_number(*t.l2_ceiling) : "auto") << "\n";
  out << "lipschitz_pairs = " << t.lipschitz_pairs << "\n";
  std::vector<std::vector<double>> conds;
  for (const auto& c : cfg.conditions) conds.emplace_back(c.values());
  out << "conditions = " << join_rows(conds) << "\n";

  const auto& b = cfg.baseline;
  out << "\n[baseline]\n";
  out << "noise_opt_steps = " << b.noise_opt.steps << "\n";
  out << "noise_opt_learning_rate = " << format_number(b.noise_opt.learning_rate) << "\n";
  out << "reg_weight = " << format_number(b.noise_opt.reg_weight) << "\n";
  out << "best_of_n = " << b.best_of_n << "\n";

  const auto& e = cfg.eval;
  out << "\n[eval]\n";
  out << "heldout = " << e.heldout << "\n";
  out << "reference = " << e.reference << "\n";
  out << "eval_every = " << e.eval_every << "\n";
  out << "fidelity = " << to_string(e.fidelity) << "\n";
  out << "knn_k = " << e.knn_k << "\n";
  out << "multistep = " << join_sizes(e.multistep) << "\n";
  out << "diversity_seeds = " << e.diversity_seeds << "\n";
  out << "diversity_samples = " << e.diversity_samples << "\n";

  const auto& th = cfg.theory;
  out << "\n[theory]\n";
  out << "latent_dim = " << th.latent_dim << "\n";
  out << "networks = " << th.networks << "\n";
  out << "lipschitz_budgets = " << join_numbers(th.lipschitz_budgets) << "\n";
  out << "points_per_network = " << th.points_per_network << "\n";
  out << "stein_dims = " << join_sizes(th.stein_dims) << "\n";
  out << "stein_networks = " << th.stein_networks << "\n";
  out << "stein_samples = " << th.stein_samples << "\n";
  out << "pushforward_samples = " << th.pushforward_samples << "\n";
  out << "dpi_samples = " << th.dpi_samples << "\n";
  out << "knn_k = " << th.knn_k << "\n";
  out << "gradient_points = " << th.gradient_points << "\n";
  return out.str();
}

void set_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.train.seed = derive_seed(seed, "train");
  cfg.baseline.noise_opt.seed = derive_seed(seed, "noise-opt");
}

Generator build_generator(const ExperimentConfig& cfg) {
  return make_generator(cfg.generator, derive_seed(cfg.seed, "generator"));
}

}  // namespace hypernoise
