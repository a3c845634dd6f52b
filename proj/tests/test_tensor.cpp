#include <gtest/gtest.h>

#include <random>

#include "dtensor/tensor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dtensor;

using testutil::code_of;
using testutil::vec;
using testutil::figure5;

TEST(Shape, Validation) {
  EXPECT_EQ(code_of([] { Shape(std::vector<Index>{}); }), ErrorCode::InvalidShape);
  EXPECT_EQ(code_of([] { Shape{2, 0}; }), ErrorCode::InvalidShape);
  EXPECT_EQ(code_of([] { Shape{-1}; }), ErrorCode::InvalidShape);
  Shape s{2, 3, 4};
  EXPECT_EQ(s.rank(), 3u);
  EXPECT_EQ(s.element_count(), 24);
  EXPECT_EQ(s.strides(), (std::vector<Index>{12, 4, 1}));
}

TEST(Shape, OffsetUnravelRoundtrip) {
  Shape s{3, 1, 5, 2};
  std::vector<Index> c(4);
  for (Index off = 0; off < s.element_count(); ++off) {
    s.unravel(off, c);
    EXPECT_EQ(s.linear_offset(c), off);
  }
}

TEST(ElementType, Widths) {
  EXPECT_EQ(byte_width(ElementType::U8), 1u);
  EXPECT_EQ(byte_width(ElementType::F32), 4u);
  EXPECT_EQ(byte_width(ElementType::F64), 8u);
}

TEST(MakeDense, RowMajor) {
  auto t = make_dense(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(t.at({1, 0}), 3.0);
  auto z = make_dense(Shape{3, 3, 3}, std::vector<double>(27, 0.0));
  EXPECT_EQ(dense_to_coo(z).nnz(), 0u);
  EXPECT_EQ(code_of([] { make_dense(Shape{2, 2}, std::vector<double>{1, 2, 3}); }), ErrorCode::LengthMismatch);
}

TEST(DenseToCoo, Figure5) {
  std::vector<double> data(27, 0.0);
  data[1] = 1;   // (0,0,1)
  data[9] = 2;   // (1,0,0)
  data[14] = 3;  // (1,1,2)
  data[26] = 4;  // (2,2,2)
  const auto c = dense_to_coo(make_dense(Shape{3, 3, 3}, data));
  EXPECT_EQ(vec(c.indices()), (std::vector<Index>{0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 2, 2}));
  EXPECT_EQ(vec(c.values()), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(vec(coo_to_dense(figure5()).data<double>()), data);
}

TEST(DenseToCoo, EmptyAndZeroShapes) {
  EXPECT_EQ(dense_to_coo(DenseTensor::zeros(Shape{4}, ElementType::F64)).nnz(), 0u);
  const auto d = coo_to_dense(CooTensor(Shape{2, 3}));
  EXPECT_EQ(vec(d.data<double>()), std::vector<double>(6, 0.0));
}

TEST(DenseToCoo, RandomRoundtrip) {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 50; ++i) {
    const auto ref = oracle::random_ref(gen, oracle::random_dims(gen, 1 + i % 4, 6), 0.3);
    const auto t = oracle::to_dense(ref);
    const auto c = dense_to_coo(t);
    EXPECT_EQ(coo_to_dense(c), t);
    EXPECT_EQ(c.nnz(), oracle::nonzeros(ref).size());
    for (std::size_t k = 1; k < c.nnz(); ++k) {
      auto a = c.index(k - 1), b = c.index(k);
      EXPECT_TRUE(std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()));
    }
    EXPECT_EQ(dense_to_coo(coo_to_dense(c)), c);
  }
}

TEST(CooTensor, ConstructionRules) {
  auto c = CooTensor::from_entries(Shape{3, 3}, {2, 2, 0, 1, 1, 1}, {5, 7, 0});
  EXPECT_EQ(c.nnz(), 2u);  // explicit zero dropped, rows sorted
  EXPECT_EQ(vec(c.indices()), (std::vector<Index>{0, 1, 2, 2}));
  EXPECT_EQ(vec(c.values()), (std::vector<double>{7, 5}));
  EXPECT_EQ(code_of([] { CooTensor::from_entries(Shape{3}, {1, 1}, {1, 2}); }), ErrorCode::DuplicateCoordinate);
  EXPECT_EQ(code_of([] { CooTensor::from_entries(Shape{3}, {3}, {1}); }), ErrorCode::OutOfBounds);
  EXPECT_EQ(code_of([] { CooTensor::from_entries(Shape{3, 3}, {1}, {1}); }), ErrorCode::LengthMismatch);
}

TEST(SliceDense, Window1D) {
  auto t = make_dense(Shape{4}, std::vector<double>{10, 11, 12, 13});
  auto s = slice_dense(t, SliceSpec({IndexRange{1, 3}}));
  EXPECT_EQ(vec(s.data<double>()), (std::vector<double>{11, 12}));
  EXPECT_EQ(slice_dense(t, SliceSpec::full(1)), t);
}

TEST(SliceDense, LeadingRangeMatchesNestedLoop) {
  std::mt19937_64 gen(3);
  const auto ref = oracle::random_ref(gen, {8, 3, 4, 4}, 0.5);
  const auto got = slice_dense(oracle::to_dense(ref), SliceSpec::leading(4, 0, 2));
  const auto want = oracle::slice(ref, {{0, 2}, {0, 3}, {0, 4}, {0, 4}});
  EXPECT_EQ(got.shape().dims(), want.dims);
  EXPECT_EQ(vec(got.data<double>()), want.data);
}

TEST(SliceDense, RandomAgainstOracle) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 100; ++i) {
    const auto ref = oracle::random_ref(gen, oracle::random_dims(gen, 1 + i % 5, 5), 0.4);
    std::vector<std::optional<IndexRange>> ranges;
    std::vector<std::pair<Index, Index>> plain;
    for (auto d : ref.dims) {
      if (gen() % 3 == 0) {
        ranges.emplace_back(std::nullopt);
        plain.emplace_back(0, d);
        continue;
      }
      const Index a = static_cast<Index>(gen() % static_cast<std::uint64_t>(d));
      const Index b = a + 1 + static_cast<Index>(gen() % static_cast<std::uint64_t>(d - a));
      ranges.emplace_back(IndexRange{a, b});
      plain.emplace_back(a, b);
    }
    const SliceSpec s(ranges);
    const auto want = oracle::slice(ref, plain);
    const auto got = slice_dense(oracle::to_dense(ref), s);
    EXPECT_EQ(vec(got.data<double>()), want.data);
    EXPECT_EQ(slice_coo(oracle::to_coo(ref), s), oracle::to_coo(want));
  }
}

TEST(SliceDense, Composition) {
  std::mt19937_64 gen(8);
  const auto t = oracle::to_dense(oracle::random_ref(gen, {6, 5, 4}, 0.5));
  const auto once = slice_dense(t, SliceSpec({IndexRange{1, 5}, IndexRange{1, 4}, std::nullopt}));
  const auto twice = slice_dense(once, SliceSpec({IndexRange{2, 4}, std::nullopt, IndexRange{1, 2}}));
  const auto direct = slice_dense(t, SliceSpec({IndexRange{3, 5}, IndexRange{1, 4}, IndexRange{1, 2}}));
  EXPECT_EQ(twice, direct);
}

TEST(SliceDense, RangeErrors) {
  auto t = DenseTensor::zeros(Shape{4, 2}, ElementType::F64);
  EXPECT_EQ(code_of([&] { slice_dense(t, SliceSpec({IndexRange{0, 5}, std::nullopt})); }), ErrorCode::RangeOutOfBounds);
  EXPECT_EQ(code_of([&] { slice_dense(t, SliceSpec({IndexRange{2, 2}, std::nullopt})); }), ErrorCode::RangeOutOfBounds);
  EXPECT_EQ(code_of([&] { slice_dense(t, SliceSpec::full(3)); }), ErrorCode::RangeOutOfBounds);
}

TEST(SliceSpec, ToString) {
  EXPECT_EQ(SliceSpec({IndexRange{0, 100}, std::nullopt, std::nullopt}).to_string(), "0:100,:,:");
}

TEST(Density, UberScale) {
  // 3,309,490 evenly spread nonzeros in (183,24,1140,1717); never densified.
  const Shape shape{183, 24, 1140, 1717};
  const Index nnz = 3309490;
  const Index step = shape.element_count() / nnz;
  std::vector<Index> idx(static_cast<std::size_t>(nnz) * 4);
  std::vector<Index> c(4);
  for (Index k = 0; k < nnz; ++k) {
    shape.unravel(k * step, c);
    std::copy(c.begin(), c.end(), idx.begin() + k * 4);
  }
  const auto coo = CooTensor::from_sorted(shape, std::move(idx), std::vector<double>(static_cast<std::size_t>(nnz), 1.0));
  EXPECT_NEAR(density(coo), 0.000385, 5e-7);
  EXPECT_EQ(classify(coo), SparsityClass::Sparse);
}

TEST(Density, Extremes) {
  EXPECT_EQ(density(CooTensor(Shape{5})), 0.0);
  const auto full = CooTensor::from_entries(Shape{2, 2}, {0, 0, 0, 1, 1, 0, 1, 1}, {1, 1, 1, 1});
  EXPECT_EQ(density(full), 1.0);
  EXPECT_EQ(classify(full), SparsityClass::General);
}

TEST(Classify, TenPercentBoundary) {
  std::vector<Index> idx;
  for (Index i = 0; i < 10; ++i) idx.push_back(i);
  const auto ten = CooTensor::from_entries(Shape{100}, idx, std::vector<double>(10, 1.0));
  EXPECT_EQ(classify(ten), SparsityClass::General);
  idx.pop_back();
  const auto nine = CooTensor::from_entries(Shape{100}, idx, std::vector<double>(9, 1.0));
  EXPECT_EQ(classify(nine), SparsityClass::Sparse);
}

TEST(CastDense, NarrowsAndWidens) {
  auto t = make_dense(Shape{3}, std::vector<double>{0, 7, 255});
  auto u8 = cast_dense(t, ElementType::U8);
  EXPECT_EQ(u8.dtype(), ElementType::U8);
  EXPECT_EQ(vec(u8.data<std::uint8_t>()), (std::vector<std::uint8_t>{0, 7, 255}));
  EXPECT_EQ(cast_dense(u8, ElementType::F64), t);
}

TEST(TensorId, Validation) {
  EXPECT_EQ(code_of([] { TensorId(""); }), ErrorCode::InvalidId);
  EXPECT_EQ(code_of([] { TensorId("a/b"); }), ErrorCode::InvalidId);
  EXPECT_EQ(code_of([] { TensorId("a b"); }), ErrorCode::InvalidId);
  EXPECT_EQ(TensorId("tensor-1").str(), "tensor-1");
}
