#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hypernoise/generators.hpp"
#include "hypernoise/hypernet.hpp"
#include "hypernoise/rewards.hpp"
#include "hypernoise/tensor.hpp"

namespace hypernoise {

// ---------------------------------------------------------------- tilted noise

enum class TiltMethod { Auto, Rejection, Snis };

std::string to_string(TiltMethod m);

struct TiltedSampleSet {
  Tensor samples;               // n x d
  std::vector<double> weights;  // self-normalized, sum to 1
  double ess = 0.0;
  TiltMethod method = TiltMethod::Rejection;
  double alpha = 1.0;
  double acceptance_rate = 1.0;  // rejection only
  std::size_t proposals = 0;
  double envelope = 0.0;                // reward level used as the rejection envelope
  std::size_t envelope_violations = 0;  // proposals whose reward exceeded it
};

/// Draws from p0*(x0) proportional to p0(x0) exp(r(g(x0)) / alpha).
///
/// Rejection sampling needs a bounded reward: max r over the generator's output
/// box, tightened to the largest reward seen in a pilot run plus a margin of
/// kPilotMargin times the pilot's reward spread. It fails for unbounded outputs
/// and aborts when the acceptance rate drops below 1e-4.
/// Auto picks rejection when an envelope exists and SNIS otherwise.
TiltedSampleSet sample_tilted_noise(const Generator& g, const Reward& r, double alpha, std::size_t n,
                                    std::uint64_t seed, TiltMethod method = TiltMethod::Auto,
                                    const std::optional<Tensor>& condition = std::nullopt);

inline constexpr double kMinAcceptanceRate = 1e-4;
inline constexpr std::size_t kPilotDraws = 20000;
inline constexpr double kPilotMargin = 0.1;

// ---------------------------------------------------------------- pushforward

struct MomentGap {
  std::string name;  // e.g. "mean[3]", "second[3]"
  double route_a = 0.0;  // moments of g(x0*) with x0* ~ p0*
  double route_b = 0.0;  // importance-weighted moments of g(x0), x0 ~ p0
  double gap = 0.0;
  double se = 0.0;
  bool within() const { return std::abs(gap) <= 4.0 * se; }
};

struct PushforwardReport {
  std::vector<MomentGap> gaps;
  /// Gaps of each route against a closed form, when one exists (affine g, linear r).
  std::vector<MomentGap> analytic_gaps;
  double ess_a = 0.0;
  double ess_b = 0.0;
  bool inconclusive = false;  // ESS under kMinEss on either route
  std::size_t failures() const;
  double max_gap_in_se() const;
};

inline constexpr double kMinEss = 100.0;

/// Compares output moments of two independent estimates of the tilted output
/// distribution: the pushforward of tilted noise through g, and direct
/// importance weighting of base outputs by exp(r / alpha).
PushforwardReport pushforward_check(const Generator& g, const Reward& r, double alpha, std::size_t n,
                                    std::uint64_t seed, const std::optional<Tensor>& condition = std::nullopt);

// ---------------------------------------------------------------- Stein

struct SteinResult {
  double lhs = 0.0;  // mean x^T f(x)
  double rhs = 0.0;  // mean Tr J_f(x)
  double se = 0.0;   // standard error of lhs - rhs (paired per sample)
  std::size_t n = 0;
  bool within(double k = 4.0) const { return std::abs(lhs - rhs) <= k * se; }
};

/// f maps a batch (rows are samples in R^d) to a batch of the same shape.
using BatchField = std::function<Tensor(const Tensor&)>;

/// Stein check for an arbitrary field; Jacobian traces by central differences.
SteinResult stein_check(const BatchField& f, std::size_t d, std::size_t n, std::uint64_t seed, double eps = 1e-5);
/// Stein check for a hypernetwork; Jacobian traces by reverse mode.
SteinResult stein_check(const NoiseHypernetwork& hn, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------- KL

/// k-nearest-neighbour estimate of KL(P || Q) from samples (rows).
/// `dim` overrides the ambient dimension used in the estimator, for samples
/// supported on a lower-dimensional manifold (0 = number of columns).
/// Zero distances trigger one deterministic jitter retry, then an error.
double kl_knn(const Tensor& samples_p, const Tensor& samples_q, std::size_t k = 5, std::size_t dim = 0);

enum class KlMethod { ClosedForm, Knn };

struct DpiResult {
  double kl_noise = 0.0;
  double kl_output = 0.0;
  double margin = 0.0;  // kl_noise - kl_output
  KlMethod method = KlMethod::Knn;
};

/// True when f is affine in x0 (no hidden layers) and g is affine, so both
/// sides of the inequality are Gaussian.
bool dpi_closed_form_available(const NoiseHypernetwork& hn, const Generator& g);

/// KL between the modulated and base noise laws and between their images under g.
DpiResult dpi_check(const NoiseHypernetwork& hn, const Generator& g, std::size_t n, std::uint64_t seed,
                    std::size_t k = 5);

// ---------------------------------------------------------------- bi-Lipschitz

struct BilipschitzResult {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double lipschitz = 0.0;  // audited upper bound used for the interval
  bool within() const;
};

/// Sampled ||T(x) - T(y)|| / ||x - y|| for T(x) = x + f(x).
BilipschitzResult bilipschitz_check(const NoiseHypernetwork& hn, std::size_t n_pairs, std::uint64_t seed);

// ---------------------------------------------------------------- report

enum class CheckStatus { Pass, Inconclusive, Fail };

std::string to_string(CheckStatus s);

struct TheoryCheck {
  std::string name;
  double statistic = 0.0;
  double tolerance = 0.0;
  CheckStatus status = CheckStatus::Pass;
};

struct TheoryReport {
  std::vector<TheoryCheck> checks;

  void add(std::string name, double statistic, double tolerance, CheckStatus status);
  /// Pass when |statistic| <= tolerance.
  void add_abs(std::string name, double statistic, double tolerance);
  bool all_pass() const;
  /// CSV text: check,statistic,tolerance,status
  std::string to_csv() const;
};

}  // namespace hypernoise
