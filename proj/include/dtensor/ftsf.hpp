#pragma once

// Flattened Tensor Storage Format: a dense rank-N tensor is split into
// d_1 * ... * d_{N-c} chunks, each the rank-c fiber over the trailing c
// dimensions, stored one chunk per table row. Chunk ordinals are 1-based and
// enumerate the leading coordinates in row-major order.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "dtensor/container.hpp"
#include "dtensor/error.hpp"
#include "dtensor/store/table.hpp"
#include "dtensor/tensor.hpp"

namespace dtensor::ftsf {

inline constexpr std::string_view kLayout = "FTSF";

struct FtsfMeta {
  std::int64_t dim_count = 0;
  std::vector<Index> dimensions;
  std::int64_t chunk_dim_count = 0;
  ElementType dtype = ElementType::F64;

  friend bool operator==(const FtsfMeta&, const FtsfMeta&) = default;
};

struct FtsfRow {
  TensorId id;
  std::int64_t chunk_index;  // 1-based
  Bytes chunk_bytes;         // nested .dten container
  FtsfMeta meta;

  friend bool operator==(const FtsfRow&, const FtsfRow&) = default;
};

/// Number of leading (non-merged) dimensions.
inline std::size_t leading_rank(const FtsfMeta& m) {
  return static_cast<std::size_t>(m.dim_count - m.chunk_dim_count);
}

inline std::vector<FtsfRow> ftsf_encode(const DenseTensor& t, std::int64_t chunk_dim, const TensorId& id) {
  const auto rank = static_cast<std::int64_t>(t.rank());
  if (chunk_dim < 1 || chunk_dim >= rank) {
    fail(ErrorCode::BadChunkDim, "chunk_dim " + std::to_string(chunk_dim) + " not in [1, " +
                                     std::to_string(rank - 1) + "]");
  }
  const auto& dims = t.shape().dims();
  const auto lead = static_cast<std::size_t>(rank - chunk_dim);
  std::vector<Index> chunk_dims(dims.begin() + static_cast<std::ptrdiff_t>(lead), dims.end());
  const Shape chunk_shape(chunk_dims);
  Index chunk_count = 1;
  for (std::size_t j = 0; j < lead; ++j) chunk_count *= dims[j];
  const auto chunk_bytes = static_cast<std::size_t>(chunk_shape.element_count()) * byte_width(t.dtype());

  const FtsfMeta meta{rank, dims, chunk_dim, t.dtype()};
  const auto raw = t.raw_bytes();
  std::vector<FtsfRow> rows;
  rows.reserve(static_cast<std::size_t>(chunk_count));
  for (Index k = 0; k < chunk_count; ++k) {
    auto piece = raw.subspan(static_cast<std::size_t>(k) * chunk_bytes, chunk_bytes);
    rows.push_back({id, k + 1, encode_dten(make_dense(chunk_shape, t.dtype(), piece)), meta});
  }
  return rows;
}

/// Reassembles the tensor from its chunk rows in any order.
inline DenseTensor ftsf_decode(std::span<const FtsfRow> rows) {
  if (rows.empty()) fail(ErrorCode::MissingChunk, "no chunk rows");
  const FtsfMeta& meta = rows.front().meta;
  const TensorId& id = rows.front().id;
  if (meta.dim_count != static_cast<std::int64_t>(meta.dimensions.size()) || meta.chunk_dim_count < 1 ||
      meta.chunk_dim_count >= meta.dim_count) {
    fail(ErrorCode::InconsistentMeta, "invalid FTSF metadata");
  }
  const Shape shape(meta.dimensions);
  const auto lead = leading_rank(meta);
  const Shape chunk_shape(std::vector<Index>(meta.dimensions.begin() + static_cast<std::ptrdiff_t>(lead),
                                             meta.dimensions.end()));
  const Index chunk_count = shape.element_count() / chunk_shape.element_count();

  std::vector<const FtsfRow*> ordered(static_cast<std::size_t>(chunk_count), nullptr);
  for (const auto& row : rows) {
    if (!(row.meta == meta) || !(row.id == id)) fail(ErrorCode::InconsistentMeta, "rows disagree on id or metadata");
    if (row.chunk_index < 1 || row.chunk_index > chunk_count) {
      fail(ErrorCode::InconsistentMeta, "chunk_index " + std::to_string(row.chunk_index) + " out of range");
    }
    auto& slot = ordered[static_cast<std::size_t>(row.chunk_index - 1)];
    if (slot) fail(ErrorCode::InconsistentMeta, "chunk " + std::to_string(row.chunk_index) + " appears twice");
    slot = &row;
  }
  const auto width = byte_width(meta.dtype);
  Bytes payload;
  payload.reserve(static_cast<std::size_t>(shape.element_count()) * width);
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    if (!ordered[k]) fail(ErrorCode::MissingChunk, "chunk " + std::to_string(k + 1) + " of " +
                                                       std::to_string(chunk_count) + " is missing");
    const DenseTensor chunk = decode_dten(ordered[k]->chunk_bytes);
    if (!(chunk.shape() == chunk_shape) || chunk.dtype() != meta.dtype) {
      fail(ErrorCode::ShapeMismatch, "chunk " + std::to_string(k + 1) + " has shape " + chunk.shape().to_string());
    }
    auto raw = chunk.raw_bytes();
    payload.insert(payload.end(), raw.begin(), raw.end());
  }
  return make_dense(shape, meta.dtype, payload);
}

// ----------------------------------------------------------------------
// Table rows

inline store::Row to_table_row(const FtsfRow& r) {
  store::Row row;
  row.set("id", r.id.str())
      .set("chunk_index", r.chunk_index)
      .set("chunk", r.chunk_bytes)
      .set("dim_count", r.meta.dim_count)
      .set("dimensions", store::I64List(r.meta.dimensions))
      .set("chunk_dim_count", r.meta.chunk_dim_count)
      .set("dtype", static_cast<std::int64_t>(r.meta.dtype));
  return row;
}

inline FtsfRow from_table_row(const store::Row& row) {
  return {TensorId(row.text("id")),
          row.i64("chunk_index"),
          row.bytes("chunk"),
          {row.i64("dim_count"), row.i64_list("dimensions"), row.i64("chunk_dim_count"),
           element_type_from_tag(row.i64("dtype"))}};
}

inline store::TensorMeta table_meta(const FtsfMeta& m) {
  store::TensorMeta meta;
  meta.layout = std::string(kLayout);
  meta.dense_shape = m.dimensions;
  meta.dtype = m.dtype;
  meta.attrs["chunk_dim_count"] = {m.chunk_dim_count};
  return meta;
}

inline void ftsf_write(store::Table& table, std::span<const FtsfRow> rows) {
  if (rows.empty()) fail(ErrorCode::MissingChunk, "nothing to write");
  std::vector<store::Row> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(to_table_row(r));
  table.append_tensor(rows.front().id, table_meta(rows.front().meta), out);
}

inline std::vector<FtsfRow> from_table_rows(std::span<const store::Row> rows) {
  std::vector<FtsfRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(from_table_row(r));
  return out;
}

inline DenseTensor ftsf_read(const store::Table& table, const TensorId& id, store::ScanStats* stats = nullptr) {
  table.meta(id);
  auto result = table.scan(id);
  if (stats) *stats += result.stats;
  return ftsf_decode(from_table_rows(result.rows));
}

/// Reads a slice that restricts only the leading (unmerged) dimensions,
/// fetching just the chunk rows inside it.
inline DenseTensor ftsf_read_slice(const store::Table& table, const TensorId& id, const SliceSpec& s,
                                   store::ScanStats* stats = nullptr) {
  const auto& meta = table.meta(id);
  const Shape shape(meta.dense_shape);
  const auto ranges = s.resolve(shape);
  const auto chunk_dim = meta.attrs.at("chunk_dim_count").at(0);
  const auto lead = static_cast<std::size_t>(static_cast<std::int64_t>(shape.rank()) - chunk_dim);
  for (std::size_t j = lead; j < shape.rank(); ++j) {
    if (ranges[j].start != 0 || ranges[j].end != shape[j]) {
      fail(ErrorCode::MergedDimSliced, "dimension " + std::to_string(j) + " is merged into chunks");
    }
  }
  const Shape lead_shape(std::vector<Index>(shape.dims().begin(), shape.dims().begin() + static_cast<std::ptrdiff_t>(lead)));
  store::Predicate pred{{"chunk_index"}, [&](const store::Row& row) {
                          std::vector<Index> coord(lead);
                          lead_shape.unravel(row.i64("chunk_index") - 1, coord);
                          for (std::size_t j = 0; j < lead; ++j) {
                            if (!ranges[j].contains(coord[j])) return false;
                          }
                          return true;
                        }};
  auto result = table.scan_pushdown(id, pred);
  if (stats) *stats += result.stats;

  auto rows = from_table_rows(result.rows);
  std::sort(rows.begin(), rows.end(), [](const FtsfRow& a, const FtsfRow& b) { return a.chunk_index < b.chunk_index; });
  const Shape out_shape = s.result_shape(shape);
  const Index expected = out_shape.element_count() / (shape.element_count() / lead_shape.element_count());
  if (static_cast<Index>(rows.size()) != expected) {
    fail(ErrorCode::MissingChunk, "slice needs " + std::to_string(expected) + " chunks, found " +
                                      std::to_string(rows.size()));
  }
  Bytes payload;
  for (const auto& r : rows) {
    const DenseTensor chunk = decode_dten(r.chunk_bytes);
    if (chunk.dtype() != meta.dtype) fail(ErrorCode::ShapeMismatch, "chunk dtype differs from table metadata");
    auto raw = chunk.raw_bytes();
    payload.insert(payload.end(), raw.begin(), raw.end());
  }
  return make_dense(out_shape, meta.dtype, payload);
}

}  // namespace dtensor::ftsf
