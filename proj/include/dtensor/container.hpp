#pragma once

// Standalone binary containers for a single tensor:
//   .dten  "DTEN" u16 version, u8 dtype, u16 ndim, ndim x u64 dims, row-major payload
//   .dcoo  "DCOO" u16 version, u16 ndim, ndim x u64 dims, u64 nnz,
//          nnz x ndim x i64 indices, nnz x f64 values
// All integers little-endian.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

#include "dtensor/bytes.hpp"
#include "dtensor/error.hpp"
#include "dtensor/tensor.hpp"

namespace dtensor {

static_assert(std::endian::native == std::endian::little, "payload copies assume a little-endian host");

inline constexpr std::uint16_t kContainerVersion = 1;

namespace detail {

inline void expect_magic(ByteReader& r, std::string_view magic) {
  if (r.remaining() < magic.size() || r.text(magic.size()) != magic) {
    fail(ErrorCode::BadMagic, "expected '" + std::string(magic) + "' header");
  }
}

inline std::vector<Index> read_dims(ByteReader& r, std::uint16_t ndim) {
  std::vector<Index> dims(ndim);
  for (auto& d : dims) {
    const auto v = r.u64();
    if (v == 0 || v > static_cast<std::uint64_t>(INT64_MAX)) fail(ErrorCode::InvalidShape, "bad dimension");
    d = static_cast<Index>(v);
  }
  return dims;
}

}  // namespace detail

inline std::size_t dten_header_size(std::size_t ndim) { return 4 + 2 + 1 + 2 + 8 * ndim; }
inline std::size_t dcoo_header_size(std::size_t ndim) { return 4 + 2 + 2 + 8 * ndim + 8; }

inline Bytes encode_dten(const DenseTensor& t) {
  ByteWriter w;
  w.buffer().reserve(dten_header_size(t.rank()) + t.raw_bytes().size());
  w.raw("DTEN");
  w.u16(kContainerVersion);
  w.u8(static_cast<std::uint8_t>(t.dtype()));
  w.u16(static_cast<std::uint16_t>(t.rank()));
  for (Index d : t.shape().dims()) w.u64(static_cast<std::uint64_t>(d));
  w.raw(t.raw_bytes());
  return w.take();
}

inline DenseTensor decode_dten(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::LengthMismatch);
  detail::expect_magic(r, "DTEN");
  if (const auto v = r.u16(); v != kContainerVersion) {
    fail(ErrorCode::UnsupportedVersion, "dten version " + std::to_string(v));
  }
  const auto tag = r.u8();
  if (tag > 2) fail(ErrorCode::BadMagic, "unknown dtype tag " + std::to_string(tag));
  const auto dtype = static_cast<ElementType>(tag);
  const auto ndim = r.u16();
  Shape shape(detail::read_dims(r, ndim));
  return make_dense(std::move(shape), dtype, r.raw(r.remaining()));
}

inline Bytes encode_dcoo(const CooTensor& c) {
  ByteWriter w;
  w.buffer().reserve(dcoo_header_size(c.rank()) + 8 * c.nnz() * (c.rank() + 1));
  w.raw("DCOO");
  w.u16(kContainerVersion);
  w.u16(static_cast<std::uint16_t>(c.rank()));
  for (Index d : c.shape().dims()) w.u64(static_cast<std::uint64_t>(d));
  w.u64(c.nnz());
  for (Index i : c.indices()) w.i64(i);
  for (double v : c.values()) w.f64(v);
  return w.take();
}

inline CooTensor decode_dcoo(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::LengthMismatch);
  detail::expect_magic(r, "DCOO");
  if (const auto v = r.u16(); v != kContainerVersion) {
    fail(ErrorCode::UnsupportedVersion, "dcoo version " + std::to_string(v));
  }
  const auto ndim = r.u16();
  Shape shape(detail::read_dims(r, ndim));
  const auto nnz = r.u64();
  if (nnz > r.remaining() / (8 * (ndim + 1ULL))) fail(ErrorCode::LengthMismatch, "nnz exceeds payload");
  std::vector<Index> indices(nnz * ndim);
  for (auto& i : indices) i = r.i64();
  std::vector<double> values(nnz);
  for (auto& v : values) v = r.f64();
  if (!r.done()) fail(ErrorCode::LengthMismatch, "trailing bytes after dcoo payload");
  return CooTensor::from_entries(std::move(shape), std::move(indices), std::move(values));
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::NotFound, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

}  // namespace dtensor
