#include "hypernoise/rewards.hpp"

#include <cmath>
#include <sstream>

#include "hypernoise/errors.hpp"

namespace hypernoise {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Tensor redness_weights(std::size_t dim, double scale) {
  if (dim % 3 != 0) {
    throw ShapeError("redness reward: output length " + std::to_string(dim) + " is not divisible by 3");
  }
  const std::size_t pixels = dim / 3;
  const double p = static_cast<double>(pixels);
  Tensor w(Shape{dim});
  for (std::size_t i = 0; i < pixels; ++i) {
    w[i] = scale / p;
    w[pixels + i] = -scale / (2.0 * p);
    w[2 * pixels + i] = -scale / (2.0 * p);
  }
  return w;
}

}  // namespace

Reward::Reward(Variant v) : variant_(std::make_shared<const Variant>(std::move(v))) {}

Reward Reward::linear(Tensor c) {
  if (c.rank() > 1 && c.rows() != 1) throw ShapeError("linear reward: c must be a vector");
  if (!c.all_finite()) throw DomainError("linear reward: non-finite coefficient");
  return Reward(Linear{c.reshaped(Shape{c.size()})});
}

Reward Reward::quadratic(Tensor q, double sign) {
  if (q.rank() != 2 || q.rows() != q.cols()) throw ShapeError("quadratic reward: Q must be square");
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(q(i, j) - q(j, i)) > 1e-12 * (1.0 + std::abs(q(i, j)))) {
        throw DomainError("quadratic reward: Q must be symmetric");
      }
    }
  }
  if (!std::isfinite(sign)) throw DomainError("quadratic reward: non-finite sign");
  return Reward(Quadratic{std::move(q), sign});
}

Reward Reward::redness(double scale) {
  if (!std::isfinite(scale)) throw DomainError("redness reward: non-finite scale");
  return Reward(Redness{scale});
}

Reward Reward::composite(std::vector<std::pair<Reward, double>> parts) {
  if (parts.empty()) throw DomainError("composite reward: no parts");
  Composite c;
  for (auto& [r, w] : parts) {
    if (!std::isfinite(w)) throw DomainError("composite reward: non-finite weight");
    c.parts.push_back(Part{std::move(r), w});
  }
  return Reward(std::move(c));
}

Reward Reward::zero(std::size_t dim) { return linear(Tensor(Shape{dim}, 0.0)); }

void Reward::check_dim(std::size_t dim) const {
  std::visit(overloaded{
                 [&](const Linear& l) {
                   if (l.c.size() != dim) {
                     throw ShapeError("linear reward expects " + std::to_string(l.c.size()) + " entries, got " +
                                      std::to_string(dim));
                   }
                 },
                 [&](const Quadratic& q) {
                   if (q.q.rows() != dim) {
                     throw ShapeError("quadratic reward expects " + std::to_string(q.q.rows()) + " entries, got " +
                                      std::to_string(dim));
                   }
                 },
                 [&](const Redness&) {
                   if (dim % 3 != 0 || dim == 0) {
                     throw ShapeError("redness reward: output length " + std::to_string(dim) +
                                      " is not divisible by 3");
                   }
                 },
                 [&](const Composite& c) {
                   for (const auto& p : c.parts) p.reward.check_dim(dim);
                 },
             },
             *variant_);
}

std::optional<Tensor> Reward::linear_weights(std::size_t dim) const {
  if (const auto* l = std::get_if<Linear>(variant_.get())) return l->c;
  if (const auto* r = std::get_if<Redness>(variant_.get())) return redness_weights(dim, r->scale);
  return std::nullopt;
}

double Reward::evaluate(const Tensor& x) const {
  const std::size_t dim = x.size();
  check_dim(dim);
  return std::visit(overloaded{
                        [&](const Linear& l) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < dim; ++i) s += l.c[i] * x[i];
                          return s;
                        },
                        [&](const Quadratic& q) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < dim; ++i) {
                            double qi = 0.0;
                            for (std::size_t j = 0; j < dim; ++j) qi += q.q(i, j) * x[j];
                            s += x[i] * qi;
                          }
                          return q.sign * 0.5 * s;
                        },
                        [&](const Redness& r) {
                          const std::size_t pixels = dim / 3;
                          double red = 0.0, green = 0.0, blue = 0.0;
                          for (std::size_t i = 0; i < pixels; ++i) {
                            red += x[i];
                            green += x[pixels + i];
                            blue += x[2 * pixels + i];
                          }
                          const double p = static_cast<double>(pixels);
                          return r.scale * (red / p - 0.5 * (green / p + blue / p));
                        },
                        [&](const Composite& c) {
                          double s = 0.0;
                          for (const auto& p : c.parts) s += p.weight * p.reward.evaluate(x);
                          return s;
                        },
                    },
                    *variant_);
}

std::vector<double> Reward::evaluate_batch(const Tensor& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out[i] = evaluate(Tensor(Shape{x.cols()}, std::vector<double>(x.row(i).begin(), x.row(i).end())));
  }
  return out;
}

Tensor Reward::gradient(const Tensor& x) const {
  const std::size_t dim = x.size();
  check_dim(dim);
  Tensor g = std::visit(overloaded{
                            [&](const Linear& l) { return l.c; },
                            [&](const Quadratic& q) {
                              Tensor out(Shape{dim});
                              for (std::size_t i = 0; i < dim; ++i) {
                                double s = 0.0;
                                for (std::size_t j = 0; j < dim; ++j) s += q.q(i, j) * x[j];
                                out[i] = q.sign * s;
                              }
                              return out;
                            },
                            [&](const Redness& r) { return redness_weights(dim, r.scale); },
                            [&](const Composite& c) {
                              Tensor out(Shape{dim}, 0.0);
                              for (const auto& p : c.parts) {
                                Tensor gp = p.reward.gradient(x);
                                for (std::size_t i = 0; i < dim; ++i) out[i] += p.weight * gp[i];
                              }
                              return out;
                            },
                        },
                        *variant_);
  return g.reshaped(x.shape());
}

NodeId Reward::build(Graph& graph, NodeId x, std::size_t dim) const {
  check_dim(dim);
  if (auto w = linear_weights(dim)) return graph.matmul_nt(x, graph.constant(w->reshaped(Shape{1, dim})));
  if (const auto* q = std::get_if<Quadratic>(variant_.get())) {
    NodeId qx = graph.matmul_nt(x, graph.constant(q->q));
    return graph.scale(graph.row_sum(graph.mul(x, qx)), 0.5 * q->sign);
  }
  const auto& c = std::get<Composite>(*variant_);
  NodeId total = graph.scale(c.parts.front().reward.build(graph, x, dim), c.parts.front().weight);
  for (std::size_t i = 1; i < c.parts.size(); ++i) {
    total = graph.add(total, graph.scale(c.parts[i].reward.build(graph, x, dim), c.parts[i].weight));
  }
  return total;
}

std::optional<Interval> Reward::range_over_box(std::size_t dim, double lo, double hi) const {
  check_dim(dim);
  if (auto w = linear_weights(dim)) {
    Interval out;
    for (double wi : w->data()) {
      out.lo += std::min(wi * lo, wi * hi);
      out.hi += std::max(wi * lo, wi * hi);
    }
    return out;
  }
  if (const auto* q = std::get_if<Quadratic>(variant_.get())) {
    const double m = std::max(std::abs(lo), std::abs(hi));
    double total = 0.0;
    for (double v : q->q.data()) total += std::abs(v);
    const double b = 0.5 * std::abs(q->sign) * total * m * m;
    return Interval{-b, b};
  }
  const auto& c = std::get<Composite>(*variant_);
  Interval out;
  for (const auto& p : c.parts) {
    auto r = p.reward.range_over_box(dim, lo, hi);
    if (!r) return std::nullopt;
    out.lo += std::min(p.weight * r->lo, p.weight * r->hi);
    out.hi += std::max(p.weight * r->lo, p.weight * r->hi);
  }
  return out;
}

bool Reward::is_identically_zero() const {
  return std::visit(overloaded{
                        [](const Linear& l) {
                          for (double v : l.c.data()) {
                            if (v != 0.0) return false;
                          }
                          return true;
                        },
                        [](const Quadratic& q) {
                          if (q.sign == 0.0) return true;
                          for (double v : q.q.data()) {
                            if (v != 0.0) return false;
                          }
                          return true;
                        },
                        [](const Redness& r) { return r.scale == 0.0; },
                        [](const Composite& c) {
                          for (const auto& p : c.parts) {
                            if (p.weight != 0.0 && !p.reward.is_identically_zero()) return false;
                          }
                          return true;
                        },
                    },
                    *variant_);
}

std::string Reward::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const Linear& l) { os << "linear(dim=" << l.c.size() << ")"; },
                 [&](const Quadratic& q) { os << "quadratic(dim=" << q.q.rows() << ", sign=" << q.sign << ")"; },
                 [&](const Redness& r) { os << "redness(scale=" << r.scale << ")"; },
                 [&](const Composite& c) { os << "composite(" << c.parts.size() << " parts)"; },
             },
             *variant_);
  return os.str();
}

}  // namespace hypernoise
