#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "hypernoise/config.hpp"
#include "hypernoise/errors.hpp"
#include "hypernoise/experiment.hpp"
#include "hypernoise/plot.hpp"
#include "hypernoise/theory.hpp"
#include "hypernoise/training.hpp"

namespace fs = std::filesystem;
using namespace hypernoise;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kConfigError = 2;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed_override;
  bool quiet = false;
  bool timing = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config file");
  if (needs_config) opt->required();
  cmd->add_option("--out", c.out, "output directory (overrides [run] output_dir)");
  cmd->add_option("--seed-override", c.seed_override, "replace the config seed");
  cmd->add_flag("--quiet", c.quiet, "suppress progress output");
  cmd->add_flag("--timing", c.timing, "record wall-clock times (report.csv is then no longer reproducible)");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed_override) set_seed(cfg, *c.seed_override);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (cfg.output_dir.empty()) throw ConfigError("[run] output_dir: not set and no --out given");
  validate(cfg);
  return cfg;
}

RunOptions run_options(const Common& c) {
  RunOptions o;
  o.timing = c.timing;
  if (!c.quiet) o.log = [](const std::string& line) { std::cerr << line << '\n'; };
  return o;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int finish(const RunResult& res, const fs::path& out) {
  if (res.failed) {
    std::cerr << "run failed: " << res.message << " (partial artifacts in " << out.string() << ")\n";
    return kRuntimeFailure;
  }
  return kOk;
}

int cmd_run(const Common& c, std::initializer_list<Method> allowed, const std::string& name) {
  const ExperimentConfig cfg = load(c);
  bool ok = false;
  for (auto m : allowed) ok = ok || m == cfg.method;
  if (!ok) throw ConfigError("[run] method: '" + to_string(cfg.method) + "' cannot be run with '" + name + "'");
  const fs::path out = cfg.output_dir;
  return finish(run_experiment(cfg, out, run_options(c)), out);
}

int cmd_theory(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  fs::remove(out / "FAILED");
  write_file_atomic(out / "resolved_config.ini", to_ini(cfg));
  const TheoryReport report = run_theory_suite(cfg.theory, cfg.seed);
  write_file_atomic(out / "report.csv", report.to_csv());
  if (!c.quiet) std::cerr << report.to_csv();
  if (!report.all_pass()) {
    write_file_atomic(out / "FAILED", "one or more theory checks did not pass; see report.csv\n");
    return kRuntimeFailure;
  }
  return kOk;
}

int cmd_tradeoff(const Common& c, const std::string& direct_path) {
  const ExperimentConfig h = load(c);
  Common d = c;
  d.config = direct_path;
  ExperimentConfig dc = load(d);
  dc.output_dir = h.output_dir;
  const fs::path out = h.output_dir;
  const auto res = run_tradeoff_to(h, dc, out, run_options(c));
  if (!c.quiet) std::cerr << res.matched_csv();
  if (res.hypernoise.failed || res.direct.failed) {
    std::cerr << "tradeoff: a run failed: " << (res.hypernoise.failed ? res.hypernoise.message : res.direct.message)
              << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}

int cmd_diversity(const Common& c, std::optional<std::size_t> seeds, const std::string& checkpoint) {
  const ExperimentConfig cfg = load(c);
  std::optional<fs::path> ckpt;
  if (!checkpoint.empty()) ckpt = checkpoint;
  const auto rows = run_diversity(cfg, seeds.value_or(cfg.eval.diversity_seeds), cfg.output_dir, ckpt, run_options(c));
  if (!c.quiet) std::cerr << diversity_csv(rows);
  return kOk;
}

int cmd_plot(const std::string& csv, const std::string& kind, const std::string& out, const std::string& x,
             const std::string& y, const std::string& title) {
  const std::string svg = plot_csv(read_file(csv), plot_kind_from_string(kind), x, y, title);
  write_file_atomic(out, svg);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise hypernetwork lab: train, compare and check reward-tilted noise models"};
  app.require_subcommand(1);

  Common theory, train, baseline, tradeoff, diversity;
  auto* c_theory = app.add_subcommand("validate-theory", "run the oracle checks and write report.csv");
  add_common(c_theory, theory, false);
  auto* c_train = app.add_subcommand("train", "train a hypernoise or direct_ft model");
  add_common(c_train, train, true);
  auto* c_base = app.add_subcommand("baseline", "run direct_ft, noise_opt or best_of_n");
  add_common(c_base, baseline, true);
  auto* c_trade = app.add_subcommand("tradeoff", "reward vs fidelity curves for hypernoise and direct_ft");
  add_common(c_trade, tradeoff, true);
  std::string direct_config;
  c_trade->add_option("--direct-config", direct_config, "direct_ft config sharing generator, reward, seed, steps")
      ->required();
  auto* c_div = app.add_subcommand("diversity", "pairwise output distances, base vs hypernoise");
  add_common(c_div, diversity, true);
  std::optional<std::size_t> div_seeds;
  std::string div_checkpoint;
  c_div->add_option("--seeds", div_seeds, "number of seeds (default [eval] diversity_seeds)");
  c_div->add_option("--checkpoint", div_checkpoint, "use this hypernetwork instead of training one");
  auto* c_plot = app.add_subcommand("plot", "render a CSV as SVG");
  std::string plot_csv_path, plot_kind = "curve", plot_out, plot_x = "step", plot_y = "reward_mean", plot_title;
  c_plot->add_option("--csv", plot_csv_path, "input CSV")->required();
  c_plot->add_option("--kind", plot_kind, "curve or bars");
  c_plot->add_option("--out", plot_out, "output SVG path")->required();
  c_plot->add_option("--x", plot_x, "x column for curves");
  c_plot->add_option("--y", plot_y, "y column for curves");
  c_plot->add_option("--title", plot_title, "chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*c_theory) return cmd_theory(theory);
    if (*c_train) return cmd_run(train, {Method::Hypernoise, Method::DirectFt}, "train");
    if (*c_base) return cmd_run(baseline, {Method::DirectFt, Method::NoiseOpt, Method::BestOfN}, "baseline");
    if (*c_trade) return cmd_tradeoff(tradeoff, direct_config);
    if (*c_div) return cmd_diversity(diversity, div_seeds, div_checkpoint);
    if (*c_plot) return cmd_plot(plot_csv_path, plot_kind, plot_out, plot_x, plot_y, plot_title);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SchemaError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}
