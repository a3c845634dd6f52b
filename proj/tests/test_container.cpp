#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "dtensor/container.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dtensor;
using testutil::code_of;

namespace {

std::uint64_t le64(const Bytes& b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

TEST(Dten, SizeOf3x3x3F64) {
  const auto bytes = encode_dten(DenseTensor::zeros(Shape{3, 3, 3}, ElementType::F64));
  EXPECT_EQ(bytes.size(), 249u);
  EXPECT_EQ(dten_header_size(3), 33u);
}

TEST(Dten, HeaderLayout) {
  const auto t = make_dense(Shape{2, 5}, ElementType::U8, Bytes{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto b = encode_dten(t);
  ASSERT_EQ(b.size(), 4u + 2 + 1 + 2 + 16 + 10);
  EXPECT_EQ(std::memcmp(b.data(), "DTEN", 4), 0);
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(b[6], 0);  // U8
  EXPECT_EQ(b[7], 2);  // ndim
  EXPECT_EQ(b[8], 0);
  EXPECT_EQ(le64(b, 9), 2u);
  EXPECT_EQ(le64(b, 17), 5u);
  EXPECT_EQ(b[25], 0);
  EXPECT_EQ(b[34], 9);
}

TEST(Dten, RoundtripAllTypes) {
  std::mt19937_64 gen(1);
  for (auto dtype : {ElementType::U8, ElementType::F32, ElementType::F64}) {
    const auto ref = oracle::random_ref(gen, {3, 4, 2}, 0.5);
    auto t = dtype == ElementType::F64 ? oracle::to_dense(ref) : cast_dense(oracle::to_dense(ref), dtype);
    EXPECT_EQ(decode_dten(encode_dten(t)), t);
  }
}

TEST(Dten, Errors) {
  auto b = encode_dten(DenseTensor::zeros(Shape{2}, ElementType::F64));
  auto bad = b;
  bad[0] = 'X';
  EXPECT_EQ(code_of([&] { decode_dten(bad); }), ErrorCode::BadMagic);
  bad = b;
  bad[4] = 2;
  EXPECT_EQ(code_of([&] { decode_dten(bad); }), ErrorCode::UnsupportedVersion);
  bad = b;
  bad.pop_back();
  EXPECT_EQ(code_of([&] { decode_dten(bad); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { decode_dten(Bytes{'D', 'T'}); }), ErrorCode::BadMagic);
}

TEST(Dcoo, SizeFormula) {
  const auto c = testutil::figure5();
  const auto b = encode_dcoo(c);
  EXPECT_EQ(b.size(), dcoo_header_size(3) + 4 * 8 * 4);
  EXPECT_EQ(encode_dcoo(CooTensor(Shape{2, 2})).size(), dcoo_header_size(2));
  EXPECT_EQ(decode_dcoo(b), c);
}

TEST(Dcoo, RandomRoundtrip) {
  std::mt19937_64 gen(2);
  for (int i = 0; i < 30; ++i) {
    const auto c = oracle::to_coo(oracle::random_ref(gen, oracle::random_dims(gen, 1 + i % 5, 5), 0.1));
    EXPECT_EQ(decode_dcoo(encode_dcoo(c)), c);
  }
}

TEST(Dcoo, Errors) {
  auto b = encode_dcoo(testutil::figure5());
  auto bad = b;
  bad[1] = 'X';
  EXPECT_EQ(code_of([&] { decode_dcoo(bad); }), ErrorCode::BadMagic);
  bad = b;
  bad.resize(bad.size() - 3);
  EXPECT_EQ(code_of([&] { decode_dcoo(bad); }), ErrorCode::LengthMismatch);
  bad = b;
  bad.push_back(0);
  EXPECT_EQ(code_of([&] { decode_dcoo(bad); }), ErrorCode::LengthMismatch);
}

TEST(Files, WriteRead) {
  testutil::TempDir dir("files");
  const auto b = encode_dcoo(testutil::figure5());
  write_file(dir.path / "x.dcoo", b);
  EXPECT_EQ(read_file(dir.path / "x.dcoo"), b);
  EXPECT_EQ(code_of([&] { read_file(dir.path / "missing.dcoo"); }), ErrorCode::NotFound);
}
