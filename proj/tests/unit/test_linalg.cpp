#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "hypernoise/errors.hpp"
#include "hypernoise/linalg.hpp"
#include "hypernoise/rng.hpp"

using namespace hypernoise;

namespace {

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t(i, j);
  return m;
}

}  // namespace

TEST(Linalg, LogDetMatchesEigen) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(s);
    const std::size_t n = 1 + s % 7;
    const Tensor j = rng.normal_matrix(n, n, 0.4);
    const auto got = linalg::logdet_and_trace(j);
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) + to_eigen(j);
    const double ref = std::log(std::abs(m.fullPivLu().determinant()));
    EXPECT_NEAR(got.log_abs_det_i_plus_j, ref, 1e-10) << s;
    EXPECT_NEAR(got.trace, to_eigen(j).trace(), 1e-12);
  }
}

TEST(Linalg, DetSignAndSolve) {
  Rng rng(3);
  const Tensor a = rng.normal_matrix(5, 5);
  const linalg::LuDecomposition lu(a);
  const Eigen::MatrixXd e = to_eigen(a);
  EXPECT_EQ(lu.det_sign(), e.determinant() > 0 ? 1 : -1);
  const Tensor b = rng.normal_vector(5);
  const Tensor x = lu.solve(b);
  const Eigen::VectorXd ref = e.fullPivLu().solve(to_eigen(b).transpose());
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(x[i], ref(i), 1e-10);
  const Tensor inv = lu.inverse();
  const Eigen::MatrixXd prod = e * to_eigen(inv);
  EXPECT_TRUE(prod.isApprox(Eigen::MatrixXd::Identity(5, 5), 1e-10));
}

TEST(Linalg, SingularMatrixIsReported) {
  const Tensor j = Tensor::matrix(2, 2, {-1, 0, 0, 0.5});  // I + J has a zero row
  EXPECT_THROW(linalg::logdet_and_trace(j), SingularMatrixError);
}

TEST(Linalg, SpectralNormMatchesSvd) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(100 + s);
    const Tensor m = rng.normal_matrix(3 + s % 4, 2 + s % 5);
    const double ref = Eigen::JacobiSVD<Eigen::MatrixXd>(to_eigen(m)).singularValues()(0);
    const double got = linalg::spectral_norm(m, 300, s);
    EXPECT_LE(got, ref * (1 + 1e-12));
    EXPECT_NEAR(got, ref, 1e-6 * ref);
  }
}

TEST(Linalg, GaussianKlClosedForm) {
  Rng rng(8);
  const std::size_t d = 3;
  const Tensor r1 = rng.normal_matrix(d, d), r2 = rng.normal_matrix(d, d);
  const Eigen::MatrixXd c1 = to_eigen(r1) * to_eigen(r1).transpose() + Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd c2 = to_eigen(r2) * to_eigen(r2).transpose() + Eigen::MatrixXd::Identity(d, d);
  const Tensor m1 = rng.normal_vector(d), m2 = rng.normal_vector(d);
  const Eigen::VectorXd dm = to_eigen(m2).transpose() - to_eigen(m1).transpose();
  const Eigen::MatrixXd c2inv = c2.inverse();
  const double ref = 0.5 * ((c2inv * c1).trace() + dm.dot(c2inv * dm) - double(d) +
                            std::log(c2.determinant() / c1.determinant()));
  Tensor t1 = Tensor::zeros(d, d), t2 = Tensor::zeros(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      t1(i, j) = c1(i, j);
      t2(i, j) = c2(i, j);
    }
  EXPECT_NEAR(linalg::gaussian_kl(m1, t1, m2, t2), ref, 1e-10);
  EXPECT_NEAR(linalg::gaussian_kl(m1, t1, m1, t1), 0.0, 1e-12);
}

TEST(Linalg, JacobianFdOfLinearMap) {
  const Tensor a = Tensor::matrix(2, 3, {1, 2, 3, -1, 0.5, 4});
  const auto f = [&](const Tensor& x) { return linalg::matvec(a, x); };
  const Tensor j = linalg::jacobian_fd(f, Tensor::vector({0.3, -0.2, 1.0}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(j(i, k), a(i, k), 1e-9);
}

TEST(Linalg, JacobianFdReportsNonFinite) {
  const auto f = [](const Tensor& x) { return Tensor::vector({std::log(x[0])}); };
  EXPECT_THROW(linalg::jacobian_fd(f, Tensor::vector({0.0})), NumericalError);
}
