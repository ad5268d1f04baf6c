#include "hypernoise/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hypernoise/errors.hpp"

namespace hypernoise::kernels {

namespace {

constexpr std::size_t kParallelWork = 1u << 16;

// Insert `value` into the ascending array `best` of length k (k smallest kept).
inline void push_smallest(std::vector<double>& best, double value) {
  if (value >= best.back()) return;
  std::size_t pos = best.size() - 1;
  while (pos > 0 && best[pos - 1] > value) {
    best[pos] = best[pos - 1];
    --pos;
  }
  best[pos] = value;
}

double kth_distance_for_row(const Tensor& query, const Tensor& reference, std::size_t i, std::size_t k,
                            bool exclude_self, std::vector<double>& best) {
  const std::size_t d = query.cols();
  best.assign(k, std::numeric_limits<double>::infinity());
  const double* q = query.data().data() + i * d;
  const double* base = reference.data().data();
  const std::size_t m = reference.rows();
  for (std::size_t j = 0; j < m; ++j) {
    if (exclude_self && j == i) continue;
    const double* r = base + j * d;
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = q[t] - r[t];
      s += diff * diff;
    }
    push_smallest(best, s);
  }
  return std::sqrt(best.back());
}

void check_knn_args(const Tensor& query, const Tensor& reference, std::size_t k, bool exclude_self) {
  if (query.cols() != reference.cols()) throw ShapeError("kth_neighbor_distances: dimension mismatch");
  if (k == 0) throw DomainError("kth_neighbor_distances: k must be >= 1");
  const std::size_t available = reference.rows() - (exclude_self ? 1 : 0);
  if (available < k) throw DomainError("kth_neighbor_distances: fewer than k reference points");
}

// Per-row sums of distances to later rows, so the final reduction order is fixed.
void pairwise_row(const Tensor& points, std::size_t i, double& sum, double& sum_sq) {
  const std::size_t d = points.cols();
  const std::size_t n = points.rows();
  const double* p = points.data().data();
  sum = 0.0;
  sum_sq = 0.0;
  for (std::size_t j = i + 1; j < n; ++j) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = p[i * d + t] - p[j * d + t];
      s += diff * diff;
    }
    sum += std::sqrt(s);
    sum_sq += s;
  }
}

MeanSd finish_pairwise(const std::vector<double>& sums, const std::vector<double>& sums_sq, std::size_t n) {
  MeanSd out;
  out.count = n * (n - 1) / 2;
  double total = 0.0;
  double total_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += sums[i];
    total_sq += sums_sq[i];
  }
  const double count = static_cast<double>(out.count);
  out.mean = total / count;
  if (out.count > 1) {
    const double var = (total_sq - count * out.mean * out.mean) / (count - 1.0);
    out.sd = std::sqrt(std::max(var, 0.0));
  }
  return out;
}

}  // namespace

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] = s;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a[p * m + i];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

std::vector<double> kth_neighbor_distances(const Tensor& query, const Tensor& reference, std::size_t k,
                                           bool exclude_self) {
  check_knn_args(query, reference, k, exclude_self);
  std::vector<double> out(query.rows());
  std::vector<double> best;
  for (std::size_t i = 0; i < query.rows(); ++i) {
    out[i] = kth_distance_for_row(query, reference, i, k, exclude_self, best);
  }
  return out;
}

MeanSd pairwise_distances(const Tensor& points) {
  const std::size_t n = points.rows();
  if (n < 2) throw DomainError("pairwise_distances: need at least two points");
  std::vector<double> sums(n), sums_sq(n);
  for (std::size_t i = 0; i < n; ++i) pairwise_row(points, i, sums[i], sums_sq[i]);
  return finish_pairwise(sums, sums_sq, n);
}

}  // namespace serial

namespace omp {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* ci = c.data() + i * n;
    std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] = s;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* ci = c.data() + i * n;
    std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a[p * m + i];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

std::vector<double> kth_neighbor_distances(const Tensor& query, const Tensor& reference, std::size_t k,
                                           bool exclude_self) {
  check_knn_args(query, reference, k, exclude_self);
  std::vector<double> out(query.rows());
  const auto rows = static_cast<std::ptrdiff_t>(query.rows());
#pragma omp parallel
  {
    std::vector<double> best;
#pragma omp for schedule(dynamic, 64)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      out[i] = kth_distance_for_row(query, reference, i, k, exclude_self, best);
    }
  }
  return out;
}

MeanSd pairwise_distances(const Tensor& points) {
  const std::size_t n = points.rows();
  if (n < 2) throw DomainError("pairwise_distances: need at least two points");
  std::vector<double> sums(n), sums_sq(n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    pairwise_row(points, i, sums[i], sums_sq[i]);
  }
  return finish_pairwise(sums, sums_sq, n);
}

}  // namespace omp

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelWork && m > 1) {
    omp::matmul(a, b, c, m, k, n);
  } else {
    serial::matmul(a, b, c, m, k, n);
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelWork && m > 1) {
    omp::matmul_nt(a, b, c, m, k, n);
  } else {
    serial::matmul_nt(a, b, c, m, k, n);
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelWork && m > 1) {
    omp::matmul_tn(a, b, c, m, k, n);
  } else {
    serial::matmul_tn(a, b, c, m, k, n);
  }
}

std::vector<double> kth_neighbor_distances(const Tensor& query, const Tensor& reference, std::size_t k,
                                           bool exclude_self) {
  if (query.rows() * reference.rows() * query.cols() >= kParallelWork) {
    return omp::kth_neighbor_distances(query, reference, k, exclude_self);
  }
  return serial::kth_neighbor_distances(query, reference, k, exclude_self);
}

MeanSd pairwise_distances(const Tensor& points) {
  if (points.rows() * points.rows() * points.cols() >= kParallelWork) return omp::pairwise_distances(points);
  return serial::pairwise_distances(points);
}

}  // namespace hypernoise::kernels
