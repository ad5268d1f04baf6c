#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hypernoise/tensor.hpp"

namespace hypernoise::linalg {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// y = A x for a matrix A and vector x (returned as a rank-1 tensor).
Tensor matvec(const Tensor& a, const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, double factor);
double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
double frobenius_norm(const Tensor& a);
double trace(const Tensor& a);

using VectorMap = std::function<Tensor(const Tensor&)>;

/// Central-difference Jacobian: entry (i, j) = (f(x + eps e_j)_i - f(x - eps e_j)_i) / (2 eps).
/// Throws NumericalError (index = probed coordinate) when f returns non-finite values.
Tensor jacobian_fd(const VectorMap& f, const Tensor& x, double eps = 1e-5);

/// Gradient of a scalar function by central differences.
Tensor gradient_fd(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps = 1e-5);

/// LU factorization with partial pivoting, P A = L U.
class LuDecomposition {
 public:
  explicit LuDecomposition(const Tensor& a);

  bool singular() const noexcept { return singular_; }
  /// log |det A|; throws SingularMatrixError when singular.
  double log_abs_det() const;
  /// Sign of det A (+1 / -1), 0 when singular.
  int det_sign() const noexcept;
  Tensor solve(const Tensor& b) const;  ///< b is a vector or a matrix of right-hand-side columns
  Tensor inverse() const;

 private:
  std::size_t n_;
  std::vector<double> lu_;
  std::vector<std::size_t> perm_;
  int parity_ = 1;
  bool singular_ = false;
};

struct TraceLogDet {
  double trace = 0.0;
  double log_abs_det_i_plus_j = 0.0;
};

/// Trace of J and log |det(I + J)| via pivoted LU of (I + J).
TraceLogDet logdet_and_trace(const Tensor& j);

/// Power-iteration estimate of the largest singular value (runs on M^T M).
/// The estimate is a lower bound of ||M||_2 and nondecreasing in `iters`.
double spectral_norm(const Tensor& m, std::size_t iters, std::uint64_t seed);

/// KL( N(mu1, cov1) || N(mu2, cov2) ) in closed form.
double gaussian_kl(const Tensor& mu1, const Tensor& cov1, const Tensor& mu2, const Tensor& cov2);

}  // namespace hypernoise::linalg
