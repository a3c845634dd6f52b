#include <gtest/gtest.h>

#include <random>

#include "dtensor/layouts.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dtensor;
using testutil::code_of;
using testutil::vec;

namespace {

store::Table table_with(const std::shared_ptr<store::ObjectStore>& os, Layout l, const std::string& prefix) {
  return store::create_table(os, prefix, schema_name(l));
}

}  // namespace

TEST(Layouts, Names) {
  EXPECT_EQ(layout_name(Layout::Bsgs), "bsgs");
  EXPECT_EQ(layout_tag(Layout::Csc), "CSC");
  EXPECT_EQ(schema_name(Layout::Ftsf), "ftsf.v1");
  for (Layout l : kAllLayouts) {
    EXPECT_EQ(parse_layout(layout_name(l)), l);
    EXPECT_EQ(parse_layout(layout_tag(l)), l);
  }
  EXPECT_EQ(code_of([] { parse_layout("dense"); }), ErrorCode::ParseError);
  EXPECT_FALSE(supports_pushdown(Layout::Csr));
  EXPECT_TRUE(supports_pushdown(Layout::Bsgs));
}

TEST(Layouts, AllLayoutsAgree) {
  std::mt19937_64 gen(41);
  for (int i = 0; i < 30; ++i) {
    const std::size_t rank = 2 + static_cast<std::size_t>(i % 3);
    const auto ref = oracle::random_ref(gen, oracle::random_dims(gen, rank, 6), 0.2);
    const auto c = oracle::to_coo(ref);
    auto os = std::make_shared<store::MemoryStore>();
    for (Layout l : kAllLayouts) {
      auto table = table_with(os, l, "t" + std::to_string(i) + layout_name(l));
      EncodeOptions opts;
      opts.chunk_len = 3;
      opts.block_shape = {2, 2};
      write_encoded(table, encode_sparse(l, c, TensorId("x"), opts));
      EXPECT_EQ(layout_of(table, TensorId("x")), l);
      EXPECT_EQ(read_coo(table, TensorId("x")), c) << layout_name(l);
      EXPECT_EQ(vec(read_dense(table, TensorId("x")).data<double>()), ref.data) << layout_name(l);
    }
  }
}

TEST(Layouts, DenseInputKeepsElementType) {
  std::mt19937_64 gen(42);
  const auto t = cast_dense(oracle::to_dense(oracle::random_ref(gen, {4, 3, 5}, 0.3)), ElementType::F32);
  auto os = std::make_shared<store::MemoryStore>();
  for (Layout l : kAllLayouts) {
    auto table = table_with(os, l, layout_name(l));
    write_encoded(table, encode_dense(l, t, TensorId("x")));
    const auto back = read_dense(table, TensorId("x"));
    EXPECT_EQ(back.dtype(), ElementType::F32) << layout_name(l);
    EXPECT_EQ(back, t) << layout_name(l);
  }
}

TEST(Layouts, SlicesMatchOracle) {
  std::mt19937_64 gen(43);
  const auto ref = oracle::random_ref(gen, {7, 5, 4}, 0.25);
  const auto c = oracle::to_coo(ref);
  auto os = std::make_shared<store::MemoryStore>();
  std::vector<store::Table> tables;
  for (Layout l : kAllLayouts) {
    tables.push_back(table_with(os, l, layout_name(l)));
    EncodeOptions opts;
    opts.chunk_len = 4;
    opts.block_shape = {2, 3};
    write_encoded(tables.back(), encode_sparse(l, c, TensorId("x"), opts));
  }
  for (int i = 0; i < 40; ++i) {
    std::vector<std::optional<IndexRange>> ranges;
    std::vector<std::pair<Index, Index>> plain;
    for (auto d : ref.dims) {
      const Index a = static_cast<Index>(gen() % static_cast<std::uint64_t>(d));
      const Index b = a + 1 + static_cast<Index>(gen() % static_cast<std::uint64_t>(d - a));
      if (i % 4 == 0 && !plain.empty()) {
        ranges.emplace_back(std::nullopt);
        plain.emplace_back(0, d);
      } else {
        ranges.emplace_back(IndexRange{a, b});
        plain.emplace_back(a, b);
      }
    }
    const SliceSpec s(ranges);
    const auto want = oracle::slice(ref, plain);
    for (std::size_t k = 0; k < tables.size(); ++k) {
      EXPECT_EQ(read_slice_coo(tables[k], TensorId("x"), s), oracle::to_coo(want)) << layout_name(kAllLayouts[k]);
      EXPECT_EQ(vec(read_slice_dense(tables[k], TensorId("x"), s).data<double>()), want.data);
    }
  }
}

TEST(Layouts, CooSliceFetchesOnlyMatchingRows) {
  auto os = std::make_shared<store::MemoryStore>();
  auto table = table_with(os, Layout::Coo, "coo");
  const auto c = testutil::figure5();
  write_encoded(table, encode_sparse(Layout::Coo, c, TensorId("x")));
  store::ScanStats stats;
  const auto got = read_slice_coo(table, TensorId("x"), SliceSpec::leading(3, 1, 2), &stats);
  EXPECT_EQ(stats.rows_scanned, 2u);
  EXPECT_EQ(stats.rows_probed, 4u);
  EXPECT_EQ(got, CooTensor::from_entries(Shape{1, 3, 3}, {0, 0, 0, 0, 1, 2}, {2, 3}));
}

TEST(Layouts, RankOneStoresOutsideCsf) {
  const auto c = CooTensor::from_entries(Shape{6}, {1, 4}, {2, 3});
  auto os = std::make_shared<store::MemoryStore>();
  for (Layout l : {Layout::Coo, Layout::Csr, Layout::Csc, Layout::Bsgs}) {
    auto table = table_with(os, l, layout_name(l));
    write_encoded(table, encode_sparse(l, c, TensorId("v")));
    EXPECT_EQ(read_coo(table, TensorId("v")), c);
  }
  EXPECT_EQ(code_of([&] { encode_sparse(Layout::Csf, c, TensorId("v")); }), ErrorCode::RankTooLow);
}
