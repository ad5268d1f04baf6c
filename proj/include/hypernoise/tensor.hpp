#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hypernoise {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Rank 0 is a scalar, rank 1 a vector, rank 2 a matrix. Matrix-style
/// accessors treat a rank-1 tensor as a single row and a scalar as 1x1.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor identity(std::size_t n);
  /// Builds a rows x cols matrix from nested rows; all rows must have equal length.
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  double item() const;
  bool all_finite() const noexcept;
  Tensor reshaped(Shape shape) const;
  /// Copy of rows [begin, end) as a matrix.
  Tensor row_block(std::size_t begin, std::size_t end) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// FNV-1a over the raw bytes of the data and shape; used for weight checksums.
std::uint64_t checksum(const Tensor& t, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace hypernoise
