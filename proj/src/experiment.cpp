#include "hypernoise/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "hypernoise/errors.hpp"
#include "hypernoise/format.hpp"
#include "hypernoise/kernels.hpp"
#include "hypernoise/linalg.hpp"
#include "hypernoise/objectives.hpp"
#include "hypernoise/oracles.hpp"
#include "hypernoise/plot.hpp"
#include "hypernoise/rng.hpp"

namespace hypernoise {

namespace {

constexpr std::size_t kKlSamples = 256;
// Pairwise distances are quadratic in the sample count; the first rows suffice.
constexpr std::size_t kDiversityRows = 2000;

using Clock = std::chrono::steady_clock;

struct RewardStats {
  double mean = 0.0;
  double se = 0.0;
};

RewardStats reward_stats(const std::vector<double>& rewards) {
  const double n = double(rewards.size());
  double mean = 0.0;
  for (double v : rewards) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : rewards) ss += (v - mean) * (v - mean);
  const double sd = rewards.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, sd / std::sqrt(n)};
}

void emit(const RunOptions& o, const std::string& line) {
  if (o.log) o.log(line);
}

std::optional<Tensor> condition_row(const std::optional<Tensor>& conds, std::size_t i) {
  if (!conds) return std::nullopt;
  return conds->row_block(i, i + 1).reshaped(Shape{conds->cols()});
}

}  // namespace

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  out << "method,step,reward_mean,reward_se,fidelity,diversity_mean_pairwise,lipschitz_audit,wall_time,n_eval\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.step << ',' << format_number(r.reward_mean) << ',' << format_number(r.reward_se) << ','
        << format_number(r.fidelity) << ',' << format_number(r.diversity_mean_pairwise) << ','
        << format_number(r.lipschitz_audit) << ',' << format_number(r.wall_time) << ',' << r.n_eval << '\n';
  }
  return out.str();
}

std::string multistep_csv(const std::vector<MultiStepRow>& rows) {
  std::ostringstream out;
  out << "model,steps,reward_mean,reward_se,n\n";
  for (const auto& r : rows)
    out << r.model << ',' << r.steps << ',' << format_number(r.reward_mean) << ',' << format_number(r.reward_se) << ','
        << r.n << '\n';
  return out.str();
}

GaussianLaw affine_output_law(const Generator& g) {
  if (g.kind() != GeneratorKind::Affine) throw DomainError("affine_output_law: generator is not affine");
  const auto& layer = g.layers().front();
  return {layer.bias, linalg::matmul(layer.weight, linalg::transpose(layer.weight))};
}

GaussianLaw affine_output_law(const NoiseHypernetwork& hn, const Generator& g) {
  if (!dpi_closed_form_available(hn, g))
    throw DomainError("affine_output_law: needs an affine generator and an affine hypernetwork");
  const std::size_t d = hn.latent_dim();
  // f(x) = M x + m exactly, so f at 0 and at the unit vectors recovers (M, m).
  Tensor probes = Tensor::zeros(d + 1, d);
  for (std::size_t j = 0; j < d; ++j) probes(j + 1, j) = 1.0;
  const Tensor f = hn.perturbation_batch(probes);
  Tensor shift(Shape{d});
  Tensor map = Tensor::identity(d);
  for (std::size_t i = 0; i < d; ++i) {
    shift[i] = f(0, i);
    for (std::size_t j = 0; j < d; ++j) map(i, j) += f(j + 1, i) - f(0, i);
  }
  const auto& layer = g.layers().front();
  const Tensor am = linalg::matmul(layer.weight, map);
  return {linalg::add(linalg::matvec(layer.weight, shift), layer.bias), linalg::matmul(am, linalg::transpose(am))};
}

std::optional<Tensor> cycled_conditions(const std::vector<Tensor>& conditions, std::size_t count) {
  if (conditions.empty()) return std::nullopt;
  const std::size_t c = conditions.front().size();
  Tensor out = Tensor::zeros(count, c);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& src = conditions[i % conditions.size()];
    for (std::size_t j = 0; j < c; ++j) out(i, j) = src[j];
  }
  return out;
}

Evaluator::Evaluator(const ExperimentConfig& cfg, std::shared_ptr<const Generator> g, Reward r)
    : cfg_(cfg), g_(std::move(g)), reward_(std::move(r)) {
  const std::size_t d = g_->latent_dim();
  noise_ = Rng(derive_seed(cfg.seed, "heldout")).normal_matrix(cfg.eval.heldout, d);
  conditions_ = cycled_conditions(cfg.conditions, cfg.eval.heldout);
  const Tensor ref_noise = Rng(derive_seed(cfg.seed, "reference")).normal_matrix(cfg.eval.reference, d);
  reference_ = g_->generate_batch(ref_noise, cycled_conditions(cfg.conditions, cfg.eval.reference));
  if (cfg.eval.fidelity == FidelityMetric::GaussianKl) {
    if (g_->kind() == GeneratorKind::Affine) {
      base_law_ = affine_output_law(*g_);
    } else {
      auto [mean, cov] = sample_moments(reference_);
      base_law_ = GaussianLaw{mean, cov};
    }
  }
}

double Evaluator::fidelity(const Tensor& outputs, const std::optional<GaussianLaw>& law) const {
  if (cfg_.eval.fidelity == FidelityMetric::KnnKl) {
    const std::size_t intrinsic = std::min(g_->latent_dim(), g_->output_dim());
    return kl_knn(outputs, reference_, cfg_.eval.knn_k, intrinsic);
  }
  if (law) return linalg::gaussian_kl(law->mean, law->covariance, base_law_->mean, base_law_->covariance);
  auto [mean, cov] = sample_moments(outputs);
  return linalg::gaussian_kl(mean, cov, base_law_->mean, base_law_->covariance);
}

ReportRow Evaluator::evaluate(const std::string& method, std::size_t step, const Tensor& outputs, double lipschitz,
                              double wall_time, const std::optional<GaussianLaw>& law) const {
  const auto stats = reward_stats(reward_.evaluate_batch(outputs));
  ReportRow row;
  row.method = method;
  row.step = step;
  row.reward_mean = stats.mean;
  row.reward_se = stats.se;
  row.fidelity = fidelity(outputs, law);
  row.diversity_mean_pairwise =
      kernels::pairwise_distances(outputs.row_block(0, std::min(kDiversityRows, outputs.rows()))).mean;
  row.lipschitz_audit = lipschitz;
  row.wall_time = wall_time;
  row.n_eval = outputs.rows();
  return row;
}

// ---------------------------------------------------------------- pipelines

namespace {

struct Context {
  const ExperimentConfig& cfg;
  const RunOptions& options;
  std::shared_ptr<const Generator> g;
  Reward reward;
  Evaluator evaluator;
  Clock::time_point start = Clock::now();

  double elapsed() const {
    return options.timing ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
  }

  MultiStepRow multistep(const std::string& model, std::size_t steps, const Tensor& outputs) const {
    const auto stats = reward_stats(reward.evaluate_batch(outputs));
    return {model, steps, stats.mean, stats.se, outputs.rows()};
  }
};

std::optional<GaussianLaw> exact_law_if_affine(const Context& ctx) {
  if (ctx.cfg.eval.fidelity != FidelityMetric::GaussianKl || ctx.g->kind() != GeneratorKind::Affine)
    return std::nullopt;
  return affine_output_law(*ctx.g);
}

void add_base_rows(Context& ctx, RunResult& res) {
  const Tensor out = ctx.g->generate_batch(ctx.evaluator.noise(), ctx.evaluator.conditions());
  const double lip = ctx.cfg.method == Method::Hypernoise ? 0.0 : std::nan("");
  res.report.rows.push_back(ctx.evaluator.evaluate("base", 0, out, lip, ctx.elapsed(), exact_law_if_affine(ctx)));
}

void add_base_multistep(Context& ctx, RunResult& res) {
  for (auto k : ctx.cfg.eval.multistep)
    res.multistep.push_back(
        ctx.multistep("base", k, ctx.g->generate_batch(ctx.evaluator.noise(), ctx.evaluator.conditions(), k)));
}

std::string kl_header() {
  return "step,l2_term,trace_term,logdet_term,exact_kl,approx_error,bound,lipschitz_used,lipschitz_sampled,n_samples\n";
}

void run_hypernoise(Context& ctx, RunResult& res) {
  const auto& cfg = ctx.cfg;
  const std::size_t kl_n = std::min(kKlSamples, cfg.eval.heldout);
  const Tensor kl_noise = ctx.evaluator.noise().row_block(0, kl_n);
  std::optional<Tensor> kl_conds;
  if (ctx.evaluator.conditions()) kl_conds = ctx.evaluator.conditions()->row_block(0, kl_n);
  const bool with_kl = ctx.g->latent_dim() <= kMaxJacobianDim;
  std::ostringstream kl;
  kl << kl_header();

  TrainConfig tc = cfg.train;
  tc.checkpoint_path = ctx.options.checkpoint_path;
  TrainOptions opts;
  if (!cfg.conditions.empty()) opts.conditions = cfg.conditions;
  opts.eval_every = cfg.eval.eval_every;
  opts.record_time = ctx.options.timing;
  opts.on_eval = [&](std::size_t step, const NoiseHypernetwork& hn) {
    const Tensor xhat = hn.modulate(ctx.evaluator.noise(), ctx.evaluator.conditions()).xhat;
    const Tensor out = ctx.g->generate_batch(xhat, ctx.evaluator.conditions());
    std::optional<GaussianLaw> law;
    if (cfg.eval.fidelity == FidelityMetric::GaussianKl && dpi_closed_form_available(hn, *ctx.g))
      law = affine_output_law(hn, *ctx.g);
    const double lip = lipschitz_lower_bound(hn, cfg.train.lipschitz_pairs, derive_seed(cfg.seed, "audit"));
    res.report.rows.push_back(ctx.evaluator.evaluate("hypernoise", step, out, lip, ctx.elapsed(), law));
    if (with_kl) {
      const auto k = exact_noise_kl(hn, kl_noise, kl_conds);
      kl << step << ',' << format_number(k.l2_term) << ',' << format_number(k.trace_term) << ','
         << format_number(k.logdet_term) << ',' << format_number(k.exact_kl) << ',' << format_number(k.approx_error)
         << ',' << format_number(k.bound) << ',' << format_number(k.lipschitz_used) << ','
         << format_number(k.lipschitz_sampled) << ',' << k.n_samples << '\n';
    }
    const auto& row = res.report.rows.back();
    emit(ctx.options, "hypernoise step " + std::to_string(step) + " reward " + format_number(row.reward_mean) +
                          " fidelity " + format_number(row.fidelity));
  };
  auto tr = train_hypernoise(ctx.g, ctx.reward, tc, opts);
  res.history_csv = tr.history.to_csv();
  if (with_kl) res.kl_csv = kl.str();
  if (tr.status != TrainStatus::Completed) {
    res.failed = true;
    res.message = "training stopped at step " + std::to_string(tr.steps_completed) + " (" + to_string(tr.status) +
                  "): " + tr.message;
  }
  for (auto k : cfg.eval.multistep) {
    const Tensor xhat = tr.hn.modulate(ctx.evaluator.noise(), ctx.evaluator.conditions()).xhat;
    res.multistep.push_back(ctx.multistep("hypernoise", k, ctx.g->generate_batch(xhat, ctx.evaluator.conditions(), k)));
  }
  res.hypernet = std::move(tr.hn);
}

void run_direct_ft(Context& ctx, RunResult& res) {
  const auto& cfg = ctx.cfg;
  DirectFinetuneConfig dc;
  dc.steps = cfg.train.steps;
  dc.batch_size = cfg.train.batch_size;
  dc.optimizer = cfg.train.optimizer;
  dc.grad_norm_clip = cfg.train.grad_norm_clip;
  dc.seed = derive_seed(cfg.seed, "direct-ft");
  dc.rank = cfg.train.rank;
  dc.lora_alpha = cfg.train.lora_alpha;
  dc.adapt_bias = cfg.adapt_bias;
  dc.log_every = cfg.train.log_every;
  FinetuneOptions opts;
  if (!cfg.conditions.empty()) opts.conditions = cfg.conditions;
  opts.eval_every = cfg.eval.eval_every;
  opts.record_time = ctx.options.timing;
  opts.on_eval = [&](std::size_t step, const AdaptedGenerator& ag) {
    const Tensor out = ag.generate_batch(ctx.evaluator.noise(), ctx.evaluator.conditions());
    std::optional<GaussianLaw> law;
    if (cfg.eval.fidelity == FidelityMetric::GaussianKl && ctx.g->kind() == GeneratorKind::Affine)
      law = affine_output_law(ag.materialize());
    res.report.rows.push_back(ctx.evaluator.evaluate("direct_ft", step, out, std::nan(""), ctx.elapsed(), law));
    const auto& row = res.report.rows.back();
    emit(ctx.options, "direct_ft step " + std::to_string(step) + " reward " + format_number(row.reward_mean) +
                          " fidelity " + format_number(row.fidelity));
  };
  auto fr = train_direct_finetune(ctx.g, ctx.reward, dc, opts);
  std::ostringstream h;
  h << "step,reward_mean,grad_norm,drift,wall_time\n";
  for (const auto& r : fr.history)
    h << r.step << ',' << format_number(r.reward_mean) << ',' << format_number(r.grad_norm) << ','
      << format_number(r.drift) << ',' << format_number(r.wall_time) << '\n';
  res.history_csv = h.str();
  if (fr.status != TrainStatus::Completed) {
    res.failed = true;
    res.message = "fine-tuning stopped at step " + std::to_string(fr.steps_completed) + " (" + to_string(fr.status) +
                  "): " + fr.message;
  }
  for (auto k : cfg.eval.multistep)
    res.multistep.push_back(
        ctx.multistep("direct_ft", k, fr.generator.generate_batch(ctx.evaluator.noise(), ctx.evaluator.conditions(), k)));
  res.adapted = std::move(fr.generator);
}

void run_noise_opt(Context& ctx, RunResult& res) {
  const auto& cfg = ctx.cfg;
  const auto results = noise_opt_batch(*ctx.g, ctx.reward, ctx.evaluator.noise(), cfg.baseline.noise_opt,
                                       ctx.evaluator.conditions());
  Tensor xstar = Tensor::zeros(results.size(), ctx.g->latent_dim());
  for (std::size_t i = 0; i < results.size(); ++i)
    for (std::size_t j = 0; j < xstar.cols(); ++j) xstar(i, j) = results[i].x0_star[j];
  const Tensor out = ctx.g->generate_batch(xstar, ctx.evaluator.conditions());
  res.report.rows.push_back(
      ctx.evaluator.evaluate("noise_opt", cfg.baseline.noise_opt.steps, out, std::nan(""), ctx.elapsed()));

  std::ostringstream h;
  h << "step,reward_mean,objective_mean,n\n";
  for (std::size_t t = 0; t < cfg.baseline.noise_opt.steps; ++t) {
    double rs = 0.0, os = 0.0;
    std::size_t n = 0;
    for (const auto& r : results) {
      if (t >= r.rewards.size()) continue;
      rs += r.rewards[t];
      os += r.objectives[t];
      ++n;
    }
    if (n == 0) break;
    h << t + 1 << ',' << format_number(rs / double(n)) << ',' << format_number(os / double(n)) << ',' << n << '\n';
  }
  res.history_csv = h.str();
  std::size_t aborted = 0;
  for (const auto& r : results) aborted += r.aborted ? 1 : 0;
  if (aborted > 0)
    emit(ctx.options, "noise_opt: " + std::to_string(aborted) + " samples stopped early on a non-finite objective");
  for (auto k : cfg.eval.multistep)
    res.multistep.push_back(ctx.multistep("noise_opt", k, ctx.g->generate_batch(xstar, ctx.evaluator.conditions(), k)));
}

void run_best_of_n(Context& ctx, RunResult& res) {
  const auto& cfg = ctx.cfg;
  const std::size_t big = cfg.baseline.best_of_n;
  std::vector<std::size_t> budgets;
  for (std::size_t n = 1; n < big; n *= 2) budgets.push_back(n);
  budgets.push_back(big);

  const std::size_t m = ctx.evaluator.noise().rows();
  const std::uint64_t base_seed = derive_seed(cfg.seed, "best-of-n");
  std::ostringstream h;
  h << "n,reward_mean,reward_se\n";
  Tensor best_noise;
  for (auto n : budgets) {
    Tensor noise = Tensor::zeros(m, ctx.g->latent_dim());
    for (std::size_t i = 0; i < m; ++i) {
      const auto b = best_of_n(*ctx.g, ctx.reward, n, derive_seed(base_seed, i), condition_row(ctx.evaluator.conditions(), i));
      for (std::size_t j = 0; j < noise.cols(); ++j) noise(i, j) = b.best_noise[j];
    }
    const Tensor out = ctx.g->generate_batch(noise, ctx.evaluator.conditions());
    res.report.rows.push_back(ctx.evaluator.evaluate("best_of_n", n, out, std::nan(""), ctx.elapsed()));
    const auto& row = res.report.rows.back();
    h << n << ',' << format_number(row.reward_mean) << ',' << format_number(row.reward_se) << '\n';
    best_noise = std::move(noise);
  }
  res.history_csv = h.str();
  for (auto k : cfg.eval.multistep)
    res.multistep.push_back(
        ctx.multistep("best_of_n", k, ctx.g->generate_batch(best_noise, ctx.evaluator.conditions(), k)));
}

}  // namespace

RunResult run_pipeline(const ExperimentConfig& cfg, const RunOptions& options) {
  validate(cfg);
  RunResult res;
  auto g = std::make_shared<const Generator>(build_generator(cfg));
  Reward reward = make_reward(cfg.reward, g->output_dim());
  Context ctx{cfg, options, g, reward, Evaluator(cfg, g, reward)};
  try {
    add_base_rows(ctx, res);
    add_base_multistep(ctx, res);
    switch (cfg.method) {
      case Method::Hypernoise: run_hypernoise(ctx, res); break;
      case Method::DirectFt: run_direct_ft(ctx, res); break;
      case Method::NoiseOpt: run_noise_opt(ctx, res); break;
      case Method::BestOfN: run_best_of_n(ctx, res); break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    res.failed = true;
    res.message = e.what();
  }
  return res;
}

namespace {

std::string curve_svg(const ExperimentReport& report, const std::string& y, const std::string& title) {
  std::map<std::string, Series> by_method;
  std::vector<std::string> order;
  for (const auto& r : report.rows) {
    if (!by_method.count(r.method)) {
      order.push_back(r.method);
      by_method[r.method].label = r.method;
    }
    auto& s = by_method[r.method];
    s.x.push_back(double(r.step));
    s.y.push_back(y == "fidelity" ? r.fidelity : r.reward_mean);
  }
  std::vector<Series> series;
  for (const auto& name : order) series.push_back(by_method[name]);
  return svg_curve(series, "step", y, title);
}

void write_run_artifacts(const ExperimentConfig& cfg, const RunResult& res, const std::filesystem::path& out) {
  write_file_atomic(out / "report.csv", res.report.to_csv());
  write_file_atomic(out / "history.csv", res.history_csv);
  write_file_atomic(out / "multistep.csv", multistep_csv(res.multistep));
  if (!res.kl_csv.empty()) write_file_atomic(out / "kl.csv", res.kl_csv);
  if (!res.report.rows.empty()) {
    write_file_atomic(out / "plots" / "reward.svg", curve_svg(res.report, "reward_mean", "reward on held-out noise"));
    write_file_atomic(out / "plots" / "fidelity.svg", curve_svg(res.report, "fidelity", "KL to base outputs"));
  }
  if (cfg.method == Method::Hypernoise && !res.history_csv.empty()) {
    const auto table = parse_csv(res.history_csv);
    if (!table.rows.empty()) {
      Series s{"total_loss", {}, {}};
      for (const auto& row : table.rows) {
        s.x.push_back(std::stod(row[0]));
        s.y.push_back(std::stod(row[3]));
      }
      write_file_atomic(out / "plots" / "loss.svg", svg_curve({s}, "step", "loss", "training loss"));
    }
  }
  if (res.failed) write_file_atomic(out / "FAILED", res.message + "\n");
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                         const RunOptions& options) {
  ExperimentConfig resolved = cfg;
  resolved.output_dir = out_dir.string();
  validate(resolved);
  std::filesystem::create_directories(out_dir);
  std::filesystem::remove(out_dir / "FAILED");
  write_file_atomic(out_dir / "resolved_config.ini", to_ini(resolved));
  RunOptions opts = options;
  if (resolved.method == Method::Hypernoise) opts.checkpoint_path = out_dir / "checkpoint.bin";
  RunResult res = run_pipeline(resolved, opts);
  write_run_artifacts(resolved, res, out_dir);
  return res;
}

// ---------------------------------------------------------------- trade-off

namespace {

// Lines of the named sections of a serialized config, keyed by section.
std::map<std::string, std::string> sections_of(const std::string& ini) {
  std::map<std::string, std::string> out;
  std::istringstream in(ini);
  std::string line, current;
  while (std::getline(in, line)) {
    if (line.size() > 2 && line.front() == '[') {
      current = line.substr(1, line.size() - 2);
      continue;
    }
    if (!line.empty()) out[current] += line + "\n";
  }
  return out;
}

}  // namespace

void check_shared_fields(const ExperimentConfig& a, const ExperimentConfig& b) {
  if (a.method != Method::Hypernoise) throw ConfigError("tradeoff: first config must use method hypernoise");
  if (b.method != Method::DirectFt) throw ConfigError("tradeoff: second config must use method direct_ft");
  if (a.seed != b.seed) throw ConfigError("tradeoff: [run] seed differs between the two configs");
  if (a.train.steps != b.train.steps) throw ConfigError("tradeoff: [train] steps differs between the two configs");
  const auto sa = sections_of(to_ini(a)), sb = sections_of(to_ini(b));
  for (const auto& [name, body] : sa) {
    const bool shared = name == "generator" || name == "eval" || name.rfind("reward", 0) == 0;
    if (!shared) continue;
    auto it = sb.find(name);
    if (it == sb.end()) throw ConfigError("tradeoff: [" + name + "] differs between the two configs");
    if (it->second != body) {
      std::istringstream la(body), lb(it->second);
      std::string x, y;
      while (std::getline(la, x) && std::getline(lb, y))
        if (x != y) throw ConfigError("tradeoff: [" + name + "] " + x.substr(0, x.find(" =")) + " differs between the two configs");
      throw ConfigError("tradeoff: [" + name + "] differs between the two configs");
    }
  }
  for (const auto& [name, body] : sb)
    if (name.rfind("reward", 0) == 0 && !sa.count(name))
      throw ConfigError("tradeoff: [" + name + "] differs between the two configs");
  if (a.conditions != b.conditions) throw ConfigError("tradeoff: [train] conditions differs between the two configs");
}

std::vector<CurvePoint> curve_of(const ExperimentReport& report, const std::string& method) {
  std::vector<CurvePoint> out;
  for (const auto& r : report.rows)
    if (r.method == "base") out.push_back({0, r.reward_mean, r.fidelity});
  for (const auto& r : report.rows)
    if (r.method == method) out.push_back({r.step, r.reward_mean, r.fidelity});
  return out;
}

std::optional<double> fidelity_at_reward(const std::vector<CurvePoint>& curve, double level) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].reward < level) continue;
    if (i == 0 || curve[i].reward == level) return curve[i].fidelity;
    const auto& a = curve[i - 1];
    const auto& b = curve[i];
    const double t = (level - a.reward) / (b.reward - a.reward);
    return a.fidelity + t * (b.fidelity - a.fidelity);
  }
  return std::nullopt;
}

std::vector<MatchedLevel> matched_reward_levels(const std::vector<CurvePoint>& h, const std::vector<CurvePoint>& d,
                                                std::size_t n_levels) {
  if (h.empty() || d.empty() || n_levels == 0) return {};
  auto lo_hi = [](const std::vector<CurvePoint>& c) {
    double lo = c.front().reward, hi = c.front().reward;
    for (const auto& p : c) {
      lo = std::min(lo, p.reward);
      hi = std::max(hi, p.reward);
    }
    return std::pair{lo, hi};
  };
  const auto [hl, hh] = lo_hi(h);
  const auto [dl, dh] = lo_hi(d);
  const double lo = std::max(hl, dl), hi = std::min(hh, dh);
  if (!(hi > lo)) return {};
  const double mid = 0.5 * (lo + hi);
  std::vector<MatchedLevel> out;
  for (std::size_t i = 0; i < n_levels; ++i) {
    const double level = n_levels == 1 ? hi : mid + (hi - mid) * double(i) / double(n_levels - 1);
    const auto fh = fidelity_at_reward(h, level), fd = fidelity_at_reward(d, level);
    if (fh && fd) out.push_back({level, *fh, *fd});
  }
  return out;
}

std::string TradeoffResult::curve_csv() const {
  std::ostringstream out;
  out << "method,step,reward_mean,fidelity\n";
  auto series = [&](const RunResult& r, const std::string& method) {
    for (const auto& p : curve_of(r.report, method))
      out << method << ',' << p.step << ',' << format_number(p.reward) << ',' << format_number(p.fidelity) << '\n';
  };
  series(hypernoise, "hypernoise");
  series(direct, "direct_ft");
  return out.str();
}

std::string TradeoffResult::matched_csv() const {
  std::ostringstream out;
  out << "level,hypernoise_fidelity,direct_fidelity,direct_minus_hypernoise\n";
  for (const auto& m : matched)
    out << format_number(m.level) << ',' << format_number(m.hypernoise_fidelity) << ','
        << format_number(m.direct_fidelity) << ',' << format_number(m.direct_fidelity - m.hypernoise_fidelity) << '\n';
  return out.str();
}

TradeoffResult run_tradeoff(const ExperimentConfig& h, const ExperimentConfig& d, const RunOptions& options) {
  check_shared_fields(h, d);
  TradeoffResult out;
  out.hypernoise = run_pipeline(h, options);
  out.direct = run_pipeline(d, options);
  out.matched = matched_reward_levels(curve_of(out.hypernoise.report, "hypernoise"),
                                      curve_of(out.direct.report, "direct_ft"));
  return out;
}

TradeoffResult run_tradeoff_to(const ExperimentConfig& h, const ExperimentConfig& d,
                               const std::filesystem::path& out_dir, const RunOptions& options) {
  check_shared_fields(h, d);
  TradeoffResult out;
  out.hypernoise = run_experiment(h, out_dir / "hypernoise", options);
  out.direct = run_experiment(d, out_dir / "direct_ft", options);
  out.matched = matched_reward_levels(curve_of(out.hypernoise.report, "hypernoise"),
                                      curve_of(out.direct.report, "direct_ft"));
  const std::string csv = out.curve_csv();
  write_file_atomic(out_dir / "tradeoff.csv", csv);
  write_file_atomic(out_dir / "tradeoff_matched.csv", out.matched_csv());
  write_file_atomic(out_dir / "tradeoff.svg",
                    plot_csv(csv, PlotKind::Curve, "fidelity", "reward_mean", "reward vs KL to base outputs"));
  return out;
}

// ---------------------------------------------------------------- diversity

std::vector<DiversityRow> diversity_analysis(const NoiseHypernetwork& hn, const Generator& g,
                                             const std::vector<Tensor>& conditions, std::size_t n_seeds,
                                             std::size_t samples, std::uint64_t seed) {
  if (n_seeds < 2) throw DomainError("diversity: n_seeds must be >= 2");
  if (samples < 2) throw DomainError("diversity: need at least two samples per seed");
  std::vector<std::optional<Tensor>> conds;
  std::vector<std::string> names;
  if (conditions.empty()) {
    conds.emplace_back(std::nullopt);
    names.emplace_back("all");
  } else {
    for (std::size_t c = 0; c < conditions.size(); ++c) {
      conds.emplace_back(cycled_conditions({conditions[c]}, samples));
      names.push_back("c" + std::to_string(c));
    }
  }
  const std::size_t pairs = samples * (samples - 1) / 2;
  std::vector<DiversityRow> rows;
  for (std::size_t c = 0; c < conds.size(); ++c) {
    std::vector<double> base, mod;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const Tensor x0 = Rng(derive_seed(derive_seed(seed, "diversity"), s)).normal_matrix(samples, g.latent_dim());
      base.push_back(kernels::pairwise_distances(g.generate_batch(x0, conds[c])).mean);
      const Tensor xhat = hn.modulate(x0, conds[c]).xhat;
      mod.push_back(kernels::pairwise_distances(g.generate_batch(xhat, conds[c])).mean);
    }
    auto summary = [&](const std::vector<double>& v, const std::string& label) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= double(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      rows.push_back({names[c], label, mean, std::sqrt(ss / double(v.size() - 1)), pairs * v.size()});
    };
    summary(base, "base");
    summary(mod, "hypernoise");
  }
  return rows;
}

std::string diversity_csv(const std::vector<DiversityRow>& rows) {
  std::ostringstream out;
  out << "condition,label,value,error,n_pairs\n";
  for (const auto& r : rows)
    out << r.condition << ',' << r.label << ',' << format_number(r.value) << ',' << format_number(r.error) << ','
        << r.n_pairs << '\n';
  return out.str();
}

std::vector<DiversityRow> run_diversity(const ExperimentConfig& cfg, std::size_t n_seeds,
                                        const std::filesystem::path& out_dir,
                                        const std::optional<std::filesystem::path>& checkpoint,
                                        const RunOptions& options) {
  if (cfg.method != Method::Hypernoise) throw ConfigError("[run] method: diversity needs a hypernoise config");
  if (n_seeds < 2) throw ConfigError("diversity: n_seeds must be >= 2");
  validate(cfg);
  auto g = std::make_shared<const Generator>(build_generator(cfg));
  std::optional<NoiseHypernetwork> hn;
  if (checkpoint) {
    hn = load_checkpoint(*checkpoint, g);
  } else {
    emit(options, "diversity: training hypernetwork");
    auto tr = train_hypernoise(g, make_reward(cfg.reward, g->output_dim()), cfg.train,
                               TrainOptions{cfg.conditions.empty() ? std::nullopt
                                                                   : std::optional<std::vector<Tensor>>(cfg.conditions),
                                            {}, 0, false});
    if (tr.status != TrainStatus::Completed) throw Error("diversity: training failed: " + tr.message);
    hn = std::move(tr.hn);
  }
  const auto rows =
      diversity_analysis(*hn, *g, cfg.conditions, n_seeds, cfg.eval.diversity_samples, cfg.seed);
  std::filesystem::create_directories(out_dir);
  const std::string csv = diversity_csv(rows);
  write_file_atomic(out_dir / "diversity.csv", csv);
  write_file_atomic(out_dir / "plots" / "diversity.svg",
                    plot_csv(csv, PlotKind::Bars, "", "", "mean pairwise output distance"));
  return rows;
}

}  // namespace hypernoise
