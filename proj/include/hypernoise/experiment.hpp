#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hypernoise/baselines.hpp"
#include "hypernoise/config.hpp"
#include "hypernoise/hypernet.hpp"

namespace hypernoise {

struct ReportRow {
  std::string method;
  std::size_t step = 0;
  double reward_mean = 0.0;
  double reward_se = 0.0;
  double fidelity = 0.0;  // KL of the method's outputs against base outputs
  double diversity_mean_pairwise = 0.0;
  double lipschitz_audit = 0.0;  // sampled Lipschitz constant of f; nan when there is no hypernetwork
  double wall_time = 0.0;        // seconds since the run started; 0 unless timing is requested
  std::size_t n_eval = 0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;

  /// method,step,reward_mean,reward_se,fidelity,diversity_mean_pairwise,lipschitz_audit,wall_time,n_eval
  std::string to_csv() const;
};

struct GaussianLaw {
  Tensor mean;
  Tensor covariance;
};

/// Exact law of g(x0) for affine g and x0 ~ N(0, I).
GaussianLaw affine_output_law(const Generator& g);
/// Exact law of g(x0 + f(x0)) when f and g are both affine.
GaussianLaw affine_output_law(const NoiseHypernetwork& hn, const Generator& g);

/// Held-out noise, reference outputs and metrics shared by every evaluation in a run.
/// Conditional generators cycle through the configured conditions row by row.
class Evaluator {
 public:
  Evaluator(const ExperimentConfig& cfg, std::shared_ptr<const Generator> g, Reward r);

  const Tensor& noise() const noexcept { return noise_; }
  const std::optional<Tensor>& conditions() const noexcept { return conditions_; }
  const Reward& reward() const noexcept { return reward_; }

  /// `law` is the exact output law when known (used by the closed-form metric).
  ReportRow evaluate(const std::string& method, std::size_t step, const Tensor& outputs, double lipschitz,
                     double wall_time, const std::optional<GaussianLaw>& law = std::nullopt) const;
  double fidelity(const Tensor& outputs, const std::optional<GaussianLaw>& law = std::nullopt) const;

 private:
  ExperimentConfig cfg_;
  std::shared_ptr<const Generator> g_;
  Reward reward_;
  Tensor noise_;
  std::optional<Tensor> conditions_;
  Tensor reference_;
  std::optional<GaussianLaw> base_law_;
};

/// `count` rows cycling through `conditions`; nullopt for an unconditional generator.
std::optional<Tensor> cycled_conditions(const std::vector<Tensor>& conditions, std::size_t count);

struct MultiStepRow {
  std::string model;
  std::size_t steps = 1;
  double reward_mean = 0.0;
  double reward_se = 0.0;
  std::size_t n = 0;
};

std::string multistep_csv(const std::vector<MultiStepRow>& rows);

struct RunOptions {
  bool timing = false;
  std::function<void(const std::string&)> log;  // progress lines; may be empty
  std::optional<std::filesystem::path> checkpoint_path;
};

struct RunResult {
  ExperimentReport report;
  std::vector<MultiStepRow> multistep;
  std::string history_csv;
  std::string kl_csv;  // hypernoise runs: exact noise KL terms at each evaluation
  bool failed = false;
  std::string message;
  std::optional<NoiseHypernetwork> hypernet;
  std::optional<AdaptedGenerator> adapted;
};

/// Runs the configured method in memory. Runtime failures set `failed` and keep
/// every row produced before the failure.
RunResult run_pipeline(const ExperimentConfig& cfg, const RunOptions& options = {});

/// run_pipeline plus artifacts under out_dir: report.csv, history.csv,
/// multistep.csv, resolved_config.ini, plots/*.svg, checkpoint.bin and kl.csv
/// for hypernoise, FAILED on failure.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                         const RunOptions& options = {});

// ---------------------------------------------------------------- trade-off

/// Throws ConfigError naming the first field that differs between the two runs
/// (generator, reward, seed, step budget or evaluation settings).
void check_shared_fields(const ExperimentConfig& hypernoise, const ExperimentConfig& direct);

/// (reward, fidelity) points in step order.
struct CurvePoint {
  std::size_t step = 0;
  double reward = 0.0;
  double fidelity = 0.0;
};

std::vector<CurvePoint> curve_of(const ExperimentReport& report, const std::string& method);

/// Fidelity where the curve first reaches `level`, linearly interpolated between
/// the two logged points that bracket the crossing. nullopt if it never does.
std::optional<double> fidelity_at_reward(const std::vector<CurvePoint>& curve, double level);

struct MatchedLevel {
  double level = 0.0;
  double hypernoise_fidelity = 0.0;
  double direct_fidelity = 0.0;
};

inline constexpr std::size_t kMatchedLevels = 10;

/// Reward levels evenly spaced over the upper half of the range both curves reach.
std::vector<MatchedLevel> matched_reward_levels(const std::vector<CurvePoint>& hypernoise,
                                                const std::vector<CurvePoint>& direct,
                                                std::size_t n_levels = kMatchedLevels);

struct TradeoffResult {
  RunResult hypernoise;
  RunResult direct;
  std::vector<MatchedLevel> matched;

  /// method,step,reward_mean,fidelity with the base point first in each series.
  std::string curve_csv() const;
  /// level,hypernoise_fidelity,direct_fidelity,direct_minus_hypernoise
  std::string matched_csv() const;
};

TradeoffResult run_tradeoff(const ExperimentConfig& hypernoise, const ExperimentConfig& direct,
                            const RunOptions& options = {});
/// Writes tradeoff.csv, tradeoff_matched.csv, tradeoff.svg and each run under hypernoise/ and direct_ft/.
TradeoffResult run_tradeoff_to(const ExperimentConfig& hypernoise, const ExperimentConfig& direct,
                               const std::filesystem::path& out_dir, const RunOptions& options = {});

// ---------------------------------------------------------------- diversity

struct DiversityRow {
  std::string condition;  // "all" for unconditional generators
  std::string label;      // base or hypernoise
  double value = 0.0;     // mean over seeds of the mean pairwise distance
  double error = 0.0;     // sd over seeds
  std::size_t n_pairs = 0;
};

/// Mean pairwise Euclidean distance of `samples` outputs per seed, for the base
/// generator and for the modulated noise, on the same draws.
std::vector<DiversityRow> diversity_analysis(const NoiseHypernetwork& hn, const Generator& g,
                                             const std::vector<Tensor>& conditions, std::size_t n_seeds,
                                             std::size_t samples, std::uint64_t seed);

/// condition,label,value,error,n_pairs
std::string diversity_csv(const std::vector<DiversityRow>& rows);

/// Trains the configured hypernetwork (or loads `checkpoint`) and writes
/// diversity.csv and plots/diversity.svg under out_dir.
std::vector<DiversityRow> run_diversity(const ExperimentConfig& cfg, std::size_t n_seeds,
                                        const std::filesystem::path& out_dir,
                                        const std::optional<std::filesystem::path>& checkpoint = std::nullopt,
                                        const RunOptions& options = {});

}  // namespace hypernoise
