#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hypernoise/errors.hpp"
#include "hypernoise/format.hpp"
#include "hypernoise/rng.hpp"
#include "hypernoise/tensor.hpp"

using namespace hypernoise;

TEST(Tensor, MatrixAccessorsAreRowMajor) {
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_DOUBLE_EQ(m(1, 0), 4.0);
  EXPECT_DOUBLE_EQ(m.row(1)[2], 6.0);
}

TEST(Tensor, VectorActsAsSingleRow) {
  Tensor v = Tensor::vector({1, 2, 3});
  EXPECT_EQ(v.rows(), 1u);
  EXPECT_EQ(v.cols(), 3u);
}

TEST(Tensor, RowBlockCopiesRows) {
  Tensor m = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  Tensor b = m.row_block(1, 3);
  EXPECT_EQ(b, Tensor::matrix(2, 2, {3, 4, 5, 6}));
}

TEST(Tensor, FromRowsRejectsRaggedInput) {
  EXPECT_THROW(Tensor::from_rows({{1, 2}, {3}}), ShapeError);
}

TEST(Tensor, AllFiniteDetectsNan) {
  Tensor v = Tensor::vector({1, std::nan("")});
  EXPECT_FALSE(v.all_finite());
}

TEST(Tensor, ChecksumDependsOnShapeAndData) {
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  EXPECT_NE(checksum(a), checksum(a.reshaped(Shape{4})));
  Tensor b = a;
  b[3] = 4.0000001;
  EXPECT_NE(checksum(a), checksum(b));
  EXPECT_EQ(checksum(a), checksum(Tensor::matrix(2, 2, {1, 2, 3, 4})));
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  EXPECT_EQ(a.normal_matrix(5, 3), b.normal_matrix(5, 3));
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, "train"), derive_seed(1, "heldout"));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(1, std::uint64_t{1}));
  EXPECT_EQ(derive_seed(9, "x"), derive_seed(9, "x"));
}

TEST(Rng, NormalMomentsAreStandard) {
  Rng rng(3);
  Tensor x = rng.normal_matrix(200000, 1);
  double m = 0, s = 0;
  for (double v : x.data()) m += v;
  m /= double(x.size());
  for (double v : x.data()) s += (v - m) * (v - m);
  s /= double(x.size() - 1);
  EXPECT_NEAR(m, 0.0, 4.0 / std::sqrt(200000.0));
  EXPECT_NEAR(s, 1.0, 0.02);
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(2.0), "2");
  const double v = 0.12345678901234567;
  EXPECT_EQ(std::stod(format_number(v)), v);
}

TEST(Format, NonFinite) {
  EXPECT_EQ(format_number(std::nan("")), "nan");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
}
