#pragma once

// Data-parallel kernels. Each kernel has a serial reference and an OpenMP
// version; both visit every output element with the same summation order, so
// their results are bit-identical regardless of thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "hypernoise/tensor.hpp"

namespace hypernoise::kernels {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

namespace serial {
/// C (m x n) = A (m x k) * B (k x n)
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n);
/// C (m x n) = A (m x k) * B^T, B is (n x k)
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n);
/// C (m x n) = A^T * B, A is (k x m), B is (k x n)
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n);
std::vector<double> kth_neighbor_distances(const Tensor& query, const Tensor& reference, std::size_t k,
                                           bool exclude_self);
MeanSd pairwise_distances(const Tensor& points);
}  // namespace serial

namespace omp {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n);
std::vector<double> kth_neighbor_distances(const Tensor& query, const Tensor& reference, std::size_t k,
                                           bool exclude_self);
MeanSd pairwise_distances(const Tensor& points);
}  // namespace omp

// Dispatching entry points: OpenMP above a work threshold, serial below it.
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n);

/// Euclidean distance from each query row to its k-th nearest reference row.
/// With `exclude_self`, query and reference are the same set and row i skips itself.
std::vector<double> kth_neighbor_distances(const Tensor& query, const Tensor& reference, std::size_t k,
                                           bool exclude_self);

/// Mean and standard deviation of all n(n-1)/2 pairwise Euclidean distances.
MeanSd pairwise_distances(const Tensor& points);

}  // namespace hypernoise::kernels
