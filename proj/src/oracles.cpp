#include "hypernoise/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hypernoise/errors.hpp"
#include "hypernoise/format.hpp"
#include "hypernoise/kernels.hpp"
#include "hypernoise/linalg.hpp"
#include "hypernoise/objectives.hpp"
#include "hypernoise/rng.hpp"

namespace hypernoise {

std::string to_string(TiltMethod m) {
  switch (m) {
    case TiltMethod::Auto: return "auto";
    case TiltMethod::Rejection: return "rejection";
    case TiltMethod::Snis: return "snis";
  }
  return "?";
}

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Inconclusive: return "inconclusive";
    case CheckStatus::Fail: return "fail";
  }
  return "?";
}

namespace {

std::optional<Tensor> broadcast_condition(const Generator& g, const std::optional<Tensor>& condition,
                                          std::size_t rows) {
  if (g.condition_dim() == 0) {
    if (condition) throw ShapeError("oracle: generator takes no condition");
    return std::nullopt;
  }
  if (!condition || condition->size() != g.condition_dim()) {
    throw ShapeError("oracle: conditional generator needs a condition of length " +
                     std::to_string(g.condition_dim()));
  }
  Tensor c = Tensor::zeros(rows, g.condition_dim());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < g.condition_dim(); ++j) c(i, j) = (*condition)[j];
  }
  return c;
}

std::vector<double> rewards_of(const Generator& g, const Reward& r, const Tensor& x0,
                               const std::optional<Tensor>& condition) {
  return r.evaluate_batch(g.generate_batch(x0, broadcast_condition(g, condition, x0.rows())));
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("tilted sampling: alpha must be > 0");
}

/// Self-normalized weights proportional to exp(logw), computed stably.
std::vector<double> normalized_weights(const std::vector<double>& logw) {
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(logw.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(logw[i] - top);
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

double ess_of(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return 1.0 / s;
}

}  // namespace

TiltedSampleSet sample_tilted_noise(const Generator& g, const Reward& r, double alpha, std::size_t n,
                                    std::uint64_t seed, TiltMethod method, const std::optional<Tensor>& condition) {
  check_alpha(alpha);
  if (n == 0) throw DomainError("tilted sampling: n must be >= 1");
  const std::size_t d = g.latent_dim();

  std::optional<double> r_max;
  if (auto box = g.output_box()) {
    if (auto range = r.range_over_box(g.output_dim(), box->first, box->second)) r_max = range->hi;
  }
  if (method == TiltMethod::Auto) method = r_max ? TiltMethod::Rejection : TiltMethod::Snis;

  TiltedSampleSet out;
  out.alpha = alpha;
  out.method = method;
  Rng rng(derive_seed(seed, "tilted-noise"));

  if (method == TiltMethod::Rejection && r_max) {
    // The box bound is exact but can be far above anything g produces. Tighten
    // it with a pilot run; proposals above the tightened envelope are counted.
    Rng pilot_rng(derive_seed(seed, "tilted-pilot"));
    const auto pilot = rewards_of(g, r, pilot_rng.normal_matrix(kPilotDraws, d), condition);
    const auto [lo, hi] = std::minmax_element(pilot.begin(), pilot.end());
    out.envelope = std::min(*r_max, *hi + kPilotMargin * (*hi - *lo));
  }

  if (method == TiltMethod::Snis) {
    out.samples = rng.normal_matrix(n, d);
    auto logw = rewards_of(g, r, out.samples, condition);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(logw[i])) throw NumericalError("tilted sampling: non-finite reward", i);
      logw[i] /= alpha;
    }
    out.weights = normalized_weights(logw);
    out.ess = ess_of(out.weights);
    out.proposals = n;
    return out;
  }

  if (!r_max) {
    throw DomainError("tilted sampling: rejection needs a bounded reward, but " + r.describe() +
                      " is unbounded on this generator's outputs; use snis");
  }
  const std::size_t batch = std::max<std::size_t>(1024, n);
  std::vector<double> accepted;
  accepted.reserve(n * d);
  std::size_t n_acc = 0;
  while (n_acc < n) {
    const Tensor x = rng.normal_matrix(batch, d);
    const auto rw = rewards_of(g, r, x, condition);
    for (std::size_t i = 0; i < batch && n_acc < n; ++i) {
      ++out.proposals;
      if (rw[i] > out.envelope) ++out.envelope_violations;
      const double u = rng.uniform();
      if (u < std::exp((rw[i] - out.envelope) / alpha)) {
        accepted.insert(accepted.end(), x.row(i).begin(), x.row(i).end());
        ++n_acc;
      }
    }
    const double rate = static_cast<double>(n_acc) / static_cast<double>(out.proposals);
    if (out.proposals >= 10000 && rate < kMinAcceptanceRate) {
      throw DomainError("tilted sampling: rejection acceptance rate " + format_number(rate) +
                        " is below 1e-4; switch to snis");
    }
  }
  out.samples = Tensor(Shape{n, d}, std::move(accepted));
  out.weights.assign(n, 1.0 / static_cast<double>(n));
  out.ess = static_cast<double>(n);
  out.acceptance_rate = static_cast<double>(n) / static_cast<double>(out.proposals);
  return out;
}

// ---------------------------------------------------------------- pushforward

namespace {

struct WeightedMoment {
  double value = 0.0;
  double se = 0.0;
};

WeightedMoment weighted_moment(const std::vector<double>& phi, const std::vector<double>& w, bool uniform) {
  WeightedMoment m;
  for (std::size_t i = 0; i < phi.size(); ++i) m.value += w[i] * phi[i];
  double s = 0.0;
  if (uniform) {
    for (double v : phi) s += (v - m.value) * (v - m.value);
    const double n = static_cast<double>(phi.size());
    m.se = std::sqrt(s / (n - 1.0) / n);
  } else {
    // delta-method variance of a self-normalized estimate
    for (std::size_t i = 0; i < phi.size(); ++i) s += w[i] * w[i] * (phi[i] - m.value) * (phi[i] - m.value);
    m.se = std::sqrt(s);
  }
  return m;
}

std::vector<WeightedMoment> output_moments(const Tensor& y, const std::vector<double>& w, bool uniform) {
  std::vector<WeightedMoment> out;
  std::vector<double> phi(y.rows());
  for (int power = 1; power <= 2; ++power) {
    for (std::size_t j = 0; j < y.cols(); ++j) {
      for (std::size_t i = 0; i < y.rows(); ++i) phi[i] = power == 1 ? y(i, j) : y(i, j) * y(i, j);
      out.push_back(weighted_moment(phi, w, uniform));
    }
  }
  return out;
}

std::string moment_name(std::size_t idx, std::size_t dim) {
  return (idx < dim ? "mean[" : "second[") + std::to_string(idx % dim) + "]";
}

}  // namespace

std::size_t PushforwardReport::failures() const {
  std::size_t n = 0;
  for (const auto& g : gaps) n += g.within() ? 0 : 1;
  for (const auto& g : analytic_gaps) n += g.within() ? 0 : 1;
  return n;
}

double PushforwardReport::max_gap_in_se() const {
  double m = 0.0;
  for (const auto* set : {&gaps, &analytic_gaps}) {
    for (const auto& g : *set) {
      const double z = g.se > 0.0 ? std::abs(g.gap) / g.se : (g.gap == 0.0 ? 0.0 : INFINITY);
      m = std::max(m, z);
    }
  }
  return m;
}

PushforwardReport pushforward_check(const Generator& g, const Reward& r, double alpha, std::size_t n,
                                    std::uint64_t seed, const std::optional<Tensor>& condition) {
  if (n < 1000) throw DomainError("pushforward_check: n must be >= 1000");
  check_alpha(alpha);
  const std::size_t dim = g.output_dim();

  // Route A: tilted noise pushed through g.
  const auto tilted = sample_tilted_noise(g, r, alpha, n, derive_seed(seed, "route-a"), TiltMethod::Auto, condition);
  const Tensor ya = g.generate_batch(tilted.samples, broadcast_condition(g, condition, n));
  const auto ma = output_moments(ya, tilted.weights, tilted.method == TiltMethod::Rejection);

  // Route B: base outputs weighted by exp(r / alpha) directly in output space.
  Rng rng(derive_seed(seed, "route-b"));
  const Tensor x0 = rng.normal_matrix(n, g.latent_dim());
  const Tensor yb = g.generate_batch(x0, broadcast_condition(g, condition, n));
  auto logw = r.evaluate_batch(yb);
  for (auto& v : logw) v /= alpha;
  const auto wb = normalized_weights(logw);
  const auto mb = output_moments(yb, wb, false);

  PushforwardReport rep;
  rep.ess_a = tilted.ess;
  rep.ess_b = ess_of(wb);
  rep.inconclusive = rep.ess_a < kMinEss || rep.ess_b < kMinEss;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    MomentGap gap;
    gap.name = moment_name(i, dim);
    gap.route_a = ma[i].value;
    gap.route_b = mb[i].value;
    gap.gap = ma[i].value - mb[i].value;
    gap.se = std::sqrt(ma[i].se * ma[i].se + mb[i].se * mb[i].se);
    rep.gaps.push_back(gap);
  }

  // Affine g with a linear reward: p0* = N(A^T c / alpha, I), so outputs are
  // N(A A^T c / alpha + b, A A^T).
  const auto* lin = std::get_if<Reward::Linear>(&r.variant());
  if (g.kind() == GeneratorKind::Affine && lin != nullptr) {
    const auto& layer = g.layers().front();
    const Tensor& a = layer.weight;
    const Tensor shift = linalg::scaled(linalg::matvec(linalg::transpose(a), lin->c), 1.0 / alpha);
    const Tensor mean = linalg::add(linalg::matvec(a, shift), layer.bias);
    const Tensor aat = linalg::matmul(a, linalg::transpose(a));
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const std::size_t j = i % dim;
      const double exact = i < dim ? mean[j] : mean[j] * mean[j] + aat(j, j);
      for (int route = 0; route < 2; ++route) {
        const auto& m = route == 0 ? ma[i] : mb[i];
        MomentGap gap;
        gap.name = std::string(route == 0 ? "a:" : "b:") + moment_name(i, dim);
        gap.route_a = m.value;
        gap.route_b = exact;
        gap.gap = m.value - exact;
        gap.se = m.se;
        rep.analytic_gaps.push_back(gap);
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------- Stein

namespace {

SteinResult stein_from_terms(const std::vector<double>& lhs, const std::vector<double>& rhs) {
  const std::size_t n = lhs.size();
  SteinResult s;
  s.n = n;
  double mean_diff = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s.lhs += lhs[i];
    s.rhs += rhs[i];
    mean_diff += lhs[i] - rhs[i];
  }
  const double nn = static_cast<double>(n);
  s.lhs /= nn;
  s.rhs /= nn;
  mean_diff /= nn;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dv = lhs[i] - rhs[i] - mean_diff;
    var += dv * dv;
  }
  s.se = std::sqrt(var / (nn - 1.0) / nn);
  return s;
}

std::vector<double> row_dots(const Tensor& x, const Tensor& f) {
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out[i] += x(i, j) * f(i, j);
  }
  return out;
}

}  // namespace

SteinResult stein_check(const BatchField& f, std::size_t d, std::size_t n, std::uint64_t seed, double eps) {
  if (n < 2) throw DomainError("stein_check: n must be >= 2");
  Rng rng(derive_seed(seed, "stein"));
  const Tensor x = rng.normal_matrix(n, d);
  const Tensor fx = f(x);
  if (fx.rows() != n || fx.cols() != d) throw ShapeError("stein_check: field must map n x d to n x d");
  std::vector<double> trace(n, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    Tensor xp = x, xm = x;
    for (std::size_t i = 0; i < n; ++i) {
      xp(i, j) += eps;
      xm(i, j) -= eps;
    }
    const Tensor fp = f(xp), fm = f(xm);
    for (std::size_t i = 0; i < n; ++i) trace[i] += (fp(i, j) - fm(i, j)) / (2.0 * eps);
  }
  return stein_from_terms(row_dots(x, fx), trace);
}

SteinResult stein_check(const NoiseHypernetwork& hn, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw DomainError("stein_check: n must be >= 2");
  const std::size_t d = hn.latent_dim();
  Rng rng(derive_seed(seed, "stein"));
  const Tensor x = rng.normal_matrix(n, d);
  std::optional<Tensor> c;
  if (hn.condition_dim() > 0) c = Tensor::zeros(n, hn.condition_dim());

  Graph graph;
  NodeId xin = graph.input("x0", true);
  std::optional<NodeId> cin;
  if (c) cin = graph.input("c", false);
  graph.set_root(hn.build(graph, xin, cin, ParamMode::Frozen));
  Bindings b{{"x0", x}};
  if (c) b["c"] = *c;
  const Tensor fx = graph.forward(b);

  std::vector<double> trace(n, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    Tensor seed_t = Tensor::zeros(n, d);
    for (std::size_t i = 0; i < n; ++i) seed_t(i, j) = 1.0;
    const Tensor gx = graph.backward(seed_t).at("x0");
    for (std::size_t i = 0; i < n; ++i) trace[i] += gx(i, j);
  }
  return stein_from_terms(row_dots(x, fx), trace);
}

// ---------------------------------------------------------------- KL

double kl_knn(const Tensor& p_in, const Tensor& q_in, std::size_t k, std::size_t dim) {
  if (k == 0) throw DomainError("kl_knn: k must be >= 1");
  if (p_in.cols() != q_in.cols()) throw ShapeError("kl_knn: sample sets differ in dimension");
  if (p_in.rows() < k + 1 || q_in.rows() < k + 1) {
    throw DomainError("kl_knn: both sample sets need at least k + 1 = " + std::to_string(k + 1) + " points");
  }
  const double n = static_cast<double>(p_in.rows());
  const double m = static_cast<double>(q_in.rows());
  const double d = static_cast<double>(dim == 0 ? p_in.cols() : dim);

  Tensor p = p_in, q = q_in;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto rho = kernels::kth_neighbor_distances(p, p, k, true);
    const auto nu = kernels::kth_neighbor_distances(p, q, k, false);
    bool zero = false;
    double s = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      if (rho[i] <= 0.0 || nu[i] <= 0.0) {
        zero = true;
        break;
      }
      s += std::log(nu[i] / rho[i]);
    }
    if (!zero) return d / n * s + std::log(m / (n - 1.0));
    if (attempt == 1) break;
    // Duplicate points: perturb both sets far below the data scale and retry once.
    double scale = 0.0;
    for (double v : p.data()) scale = std::max(scale, std::abs(v));
    for (double v : q.data()) scale = std::max(scale, std::abs(v));
    const double jitter = 1e-9 * (1.0 + scale);
    Rng rng(0x6a177e4ULL);
    for (auto& v : p.data()) v += jitter * rng.normal();
    for (auto& v : q.data()) v += jitter * rng.normal();
  }
  throw DomainError("kl_knn: zero nearest-neighbour distances persist after jitter (duplicate samples)");
}

bool dpi_closed_form_available(const NoiseHypernetwork& hn, const Generator& g) {
  return g.kind() == GeneratorKind::Affine && hn.backbone().kind() == GeneratorKind::Affine &&
         hn.adapters().size() == 1;
}

namespace {

/// f(x) = M x + m for a hypernetwork whose head reads x0 directly.
std::pair<Tensor, Tensor> affine_parts(const NoiseHypernetwork& hn) {
  const auto& head = hn.adapters().back();
  const Tensor full =
      linalg::scaled(linalg::matmul(hn.parameters().at(head.up_name()), hn.parameters().at(head.down_name())),
                     hn.scale());
  const std::size_t d = hn.latent_dim();
  Tensor m_mat = Tensor::zeros(d, d);
  Tensor m_vec(Shape{d});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) m_mat(i, j) = full(i, j);
    m_vec[i] = full(i, d);
  }
  return {m_mat, m_vec};
}

}  // namespace

DpiResult dpi_check(const NoiseHypernetwork& hn, const Generator& g, std::size_t n, std::uint64_t seed,
                    std::size_t k) {
  if (g.latent_dim() != hn.latent_dim()) throw ShapeError("dpi_check: latent dimension mismatch");
  const std::size_t d = hn.latent_dim();
  DpiResult res;

  if (dpi_closed_form_available(hn, g)) {
    const auto [m_mat, m_vec] = affine_parts(hn);
    const Tensor t = linalg::add(Tensor::identity(d), m_mat);
    const Tensor cov = linalg::matmul(t, linalg::transpose(t));
    res.method = KlMethod::ClosedForm;
    res.kl_noise = linalg::gaussian_kl(m_vec, cov, Tensor(Shape{d}, 0.0), Tensor::identity(d));
    const Tensor& a = g.layers().front().weight;
    const std::size_t dout = a.rows();
    const Tensor at = linalg::transpose(a);
    if (dout <= d) {
      const Tensor mean = linalg::matvec(a, m_vec);  // the bias cancels
      const Tensor cov_out = linalg::matmul(linalg::matmul(a, cov), at);
      const Tensor base_out = linalg::matmul(a, at);
      res.kl_output = linalg::gaussian_kl(mean, cov_out, Tensor(Shape{dout}, 0.0), base_out);
      res.margin = res.kl_noise - res.kl_output;
      return res;
    }
    // Taller than wide: an injective A is invertible on its range, where KL is unchanged.
    if (!linalg::LuDecomposition(linalg::matmul(at, a)).singular()) {
      res.kl_output = res.kl_noise;
      res.margin = 0.0;
      return res;
    }
  }

  res.method = KlMethod::Knn;
  Rng rng_a(derive_seed(seed, "dpi-modulated"));
  Rng rng_b(derive_seed(seed, "dpi-base"));
  const Tensor x0 = rng_a.normal_matrix(n, d);
  const Tensor ref = rng_b.normal_matrix(n, d);
  std::optional<Tensor> c;
  if (hn.condition_dim() > 0) c = Tensor::zeros(n, hn.condition_dim());
  const Tensor xhat = hn.modulate(x0, c).xhat;
  res.kl_noise = kl_knn(xhat, ref, k);
  // Both output laws live on the image of a d-dimensional latent space.
  const std::size_t intrinsic = std::min(d, g.output_dim());
  res.kl_output = kl_knn(g.generate_batch(xhat, c), g.generate_batch(ref, c), k, intrinsic);
  res.margin = res.kl_noise - res.kl_output;
  return res;
}

// ---------------------------------------------------------------- bi-Lipschitz

bool BilipschitzResult::within() const {
  const double tol = 1e-9;
  return min_ratio >= 1.0 - lipschitz - tol && max_ratio <= 1.0 + lipschitz + tol;
}

BilipschitzResult bilipschitz_check(const NoiseHypernetwork& hn, std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs == 0) throw DomainError("bilipschitz_check: n_pairs must be >= 1");
  const std::size_t d = hn.latent_dim();
  Rng rng(derive_seed(seed, "bilipschitz"));
  const Tensor x = rng.normal_matrix(n_pairs, d);
  Tensor y = x;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const double radius = (i % 2 == 0) ? 1.0 : 1e-3;
    for (std::size_t j = 0; j < d; ++j) y(i, j) = x(i, j) + radius * rng.normal();
  }
  std::optional<Tensor> c;
  if (hn.condition_dim() > 0) c = Tensor::zeros(n_pairs, hn.condition_dim());
  const Tensor tx = hn.modulate(x, c).xhat;
  const Tensor ty = hn.modulate(y, c).xhat;

  BilipschitzResult res;
  res.min_ratio = INFINITY;
  res.max_ratio = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      num += (tx(i, j) - ty(i, j)) * (tx(i, j) - ty(i, j));
      den += (x(i, j) - y(i, j)) * (x(i, j) - y(i, j));
    }
    if (den == 0.0) continue;
    const double ratio = std::sqrt(num / den);
    res.min_ratio = std::min(res.min_ratio, ratio);
    res.max_ratio = std::max(res.max_ratio, ratio);
  }
  res.lipschitz = hn.lipschitz_upper_bound();
  return res;
}

// ---------------------------------------------------------------- report

void TheoryReport::add(std::string name, double statistic, double tolerance, CheckStatus status) {
  checks.push_back(TheoryCheck{std::move(name), statistic, tolerance, status});
}

void TheoryReport::add_abs(std::string name, double statistic, double tolerance) {
  const bool ok = std::isfinite(statistic) && std::abs(statistic) <= tolerance;
  add(std::move(name), statistic, tolerance, ok ? CheckStatus::Pass : CheckStatus::Fail);
}

bool TheoryReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.status == CheckStatus::Pass; });
}

std::string TheoryReport::to_csv() const {
  std::ostringstream os;
  os << "check,statistic,tolerance,status\n";
  for (const auto& c : checks) {
    os << c.name << ',' << format_number(c.statistic) << ',' << format_number(c.tolerance) << ','
       << to_string(c.status) << '\n';
  }
  return os.str();
}

}  // namespace hypernoise
