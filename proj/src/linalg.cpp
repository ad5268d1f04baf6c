#include "hypernoise/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "hypernoise/errors.hpp"
#include "hypernoise/kernels.hpp"
#include "hypernoise/rng.hpp"

namespace hypernoise::linalg {

namespace {

void require_same_size(const Tensor& a, const Tensor& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": size mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

void require_square(const Tensor& a, const char* what) {
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw ShapeError(std::string(what) + ": expected a square matrix, got " + shape_to_string(a.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_to_string(a.shape()) + " * " + shape_to_string(b.shape()));
  }
  Tensor c = Tensor::zeros(a.rows(), b.cols());
  kernels::matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t = Tensor::zeros(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  if (a.cols() != x.size()) {
    throw ShapeError("matvec: " + shape_to_string(a.shape()) + " * " + shape_to_string(x.shape()));
  }
  Tensor y(Shape{a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "add");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "sub");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Tensor scaled(const Tensor& a, double factor) {
  Tensor c = a;
  for (auto& v : c.data()) v *= factor;
  return c;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double frobenius_norm(const Tensor& a) { return norm2(a); }

double trace(const Tensor& a) {
  require_square(a, "trace");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
  return s;
}

Tensor jacobian_fd(const VectorMap& f, const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw DomainError("jacobian_fd: eps must be positive");
  const std::size_t n = x.size();
  Tensor probe = x;
  std::size_t m = 0;
  Tensor jac;
  for (std::size_t j = 0; j < n; ++j) {
    const double orig = probe[j];
    probe[j] = orig + eps;
    Tensor fp = f(probe);
    probe[j] = orig - eps;
    Tensor fm = f(probe);
    probe[j] = orig;
    if (!fp.all_finite() || !fm.all_finite()) {
      throw NumericalError("jacobian_fd: non-finite map output when probing coordinate " + std::to_string(j), j);
    }
    if (j == 0) {
      m = fp.size();
      jac = Tensor::zeros(m, n);
    }
    if (fp.size() != m || fm.size() != m) throw ShapeError("jacobian_fd: map output size changed between probes");
    for (std::size_t i = 0; i < m; ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * eps);
  }
  return jac;
}

Tensor gradient_fd(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor jac = jacobian_fd([&f](const Tensor& p) { return Tensor::vector({f(p)}); }, x, eps);
  return jac.reshaped(x.shape());
}

LuDecomposition::LuDecomposition(const Tensor& a) : n_(a.rows()) {
  require_square(a, "LU");
  lu_.assign(a.data().begin(), a.data().end());
  perm_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;

  double scale = 0.0;
  for (double v : lu_) scale = std::max(scale, std::abs(v));
  const double tiny = scale * static_cast<double>(n_) * 1e-15;

  for (std::size_t k = 0; k < n_; ++k) {
    std::size_t pivot = k;
    double best = std::abs(lu_[k * n_ + k]);
    for (std::size_t i = k + 1; i < n_; ++i) {
      const double v = std::abs(lu_[i * n_ + k]);
      if (v > best) {
        best = v;
        pivot = i;
      }
    }
    if (best <= tiny || best == 0.0) {
      singular_ = true;
      continue;
    }
    if (pivot != k) {
      for (std::size_t j = 0; j < n_; ++j) std::swap(lu_[k * n_ + j], lu_[pivot * n_ + j]);
      std::swap(perm_[k], perm_[pivot]);
      parity_ = -parity_;
    }
    const double diag = lu_[k * n_ + k];
    for (std::size_t i = k + 1; i < n_; ++i) {
      const double factor = lu_[i * n_ + k] / diag;
      lu_[i * n_ + k] = factor;
      for (std::size_t j = k + 1; j < n_; ++j) lu_[i * n_ + j] -= factor * lu_[k * n_ + j];
    }
  }
}

double LuDecomposition::log_abs_det() const {
  if (singular_) throw SingularMatrixError("matrix is singular to machine precision");
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) s += std::log(std::abs(lu_[i * n_ + i]));
  return s;
}

int LuDecomposition::det_sign() const noexcept {
  if (singular_) return 0;
  int sign = parity_;
  for (std::size_t i = 0; i < n_; ++i) {
    if (lu_[i * n_ + i] < 0.0) sign = -sign;
  }
  return sign;
}

Tensor LuDecomposition::solve(const Tensor& b) const {
  if (singular_) throw SingularMatrixError("solve: matrix is singular to machine precision");
  const bool is_vector = b.rank() <= 1;
  const std::size_t cols = is_vector ? 1 : b.cols();
  const std::size_t rows = is_vector ? b.size() : b.rows();
  if (rows != n_) throw ShapeError("solve: right-hand side has wrong length");
  Tensor x = is_vector ? Tensor(Shape{n_}) : Tensor::zeros(n_, cols);
  std::vector<double> y(n_);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t i = 0; i < n_; ++i) {
      double s = b[perm_[i] * cols + c];
      for (std::size_t j = 0; j < i; ++j) s -= lu_[i * n_ + j] * y[j];
      y[i] = s;
    }
    for (std::size_t i = n_; i-- > 0;) {
      double s = y[i];
      for (std::size_t j = i + 1; j < n_; ++j) s -= lu_[i * n_ + j] * y[j];
      y[i] = s / lu_[i * n_ + i];
    }
    for (std::size_t i = 0; i < n_; ++i) x[i * cols + c] = y[i];
  }
  return x;
}

Tensor LuDecomposition::inverse() const { return solve(Tensor::identity(n_)); }

TraceLogDet logdet_and_trace(const Tensor& j) {
  require_square(j, "logdet_and_trace");
  if (!j.all_finite()) throw NumericalError("logdet_and_trace: non-finite Jacobian entry", 0);
  Tensor ipj = j;
  for (std::size_t i = 0; i < j.rows(); ++i) ipj(i, i) += 1.0;
  LuDecomposition lu(ipj);
  if (lu.singular()) throw SingularMatrixError("logdet_and_trace: I + J is singular to machine precision");
  return {trace(j), lu.log_abs_det()};
}

double spectral_norm(const Tensor& m, std::size_t iters, std::uint64_t seed) {
  if (iters == 0) throw DomainError("spectral_norm: iters must be >= 1");
  const std::size_t n = m.cols();
  Rng rng(seed);
  Tensor v = rng.normal_vector(n);
  double nv = norm2(v);
  if (nv == 0.0) {
    v[0] = 1.0;
    nv = 1.0;
  }
  for (auto& e : v.data()) e /= nv;

  const Tensor mt = transpose(m);
  double best = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    Tensor mv = matvec(m, v);
    const double est = norm2(mv);
    best = std::max(best, est);
    Tensor w = matvec(mt, mv);
    const double nw = norm2(w);
    if (nw == 0.0 || !std::isfinite(nw)) break;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
  }
  return best;
}

double gaussian_kl(const Tensor& mu1, const Tensor& cov1, const Tensor& mu2, const Tensor& cov2) {
  require_square(cov1, "gaussian_kl");
  require_square(cov2, "gaussian_kl");
  const std::size_t k = mu1.size();
  if (mu2.size() != k || cov1.rows() != k || cov2.rows() != k) throw ShapeError("gaussian_kl: dimension mismatch");
  LuDecomposition lu2(cov2);
  LuDecomposition lu1(cov1);
  if (lu1.singular() || lu2.singular()) throw SingularMatrixError("gaussian_kl: singular covariance");
  const Tensor s2inv_s1 = lu2.solve(cov1);
  const Tensor diff = sub(mu2, mu1);
  const Tensor s2inv_diff = lu2.solve(diff);
  return 0.5 * (trace(s2inv_s1) + dot(diff, s2inv_diff) - static_cast<double>(k) + lu2.log_abs_det() -
                lu1.log_abs_det());
}

}  // namespace hypernoise::linalg
