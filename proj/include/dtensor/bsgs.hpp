#pragma once

// Block Sparse Generic Storage. The block shape (rank M <= N) tiles the
// trailing M dimensions; leading dimensions get implicit size-1 blocks. Each
// block holding at least one nonzero becomes one row with its grid
// coordinates and its row-major values, interior zeros included. Dimensions
// that are not multiples of the block are zero-padded logically.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtensor/error.hpp"
#include "dtensor/store/table.hpp"
#include "dtensor/tensor.hpp"

namespace dtensor::bsgs {

inline constexpr std::string_view kLayout = "BSGS";

struct BsgsBlockRow {
  TensorId id;
  std::vector<Index> dense_shape;
  std::vector<Index> block_shape;
  std::vector<Index> indices;  // grid coordinates, length N
  std::vector<double> values;  // prod(block_shape) entries

  friend bool operator==(const BsgsBlockRow&, const BsgsBlockRow&) = default;
};

/// Block shape extended to full rank with leading 1s.
inline std::vector<Index> full_block(const Shape& dense, std::span<const Index> block_shape) {
  const std::size_t rank = dense.rank();
  const std::size_t m = block_shape.size();
  if (m < 1 || m > rank) {
    fail(ErrorCode::BadBlockShape, "block rank " + std::to_string(m) + " not in [1, " + std::to_string(rank) + "]");
  }
  std::vector<Index> b(rank, 1);
  for (std::size_t j = 0; j < m; ++j) {
    if (block_shape[j] < 1) fail(ErrorCode::BadBlockShape, "block sizes must be >= 1");
    b[rank - m + j] = block_shape[j];
  }
  return b;
}

inline std::vector<Index> grid_shape(const Shape& dense, std::span<const Index> block_shape) {
  const auto b = full_block(dense, block_shape);
  std::vector<Index> g(dense.rank());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = (dense[j] + b[j] - 1) / b[j];
  return g;
}

/// Default block shape: the trailing two dimensions, each clipped to 32.
inline std::vector<Index> default_block_shape(const Shape& dense) {
  const auto& d = dense.dims();
  std::vector<Index> b;
  for (std::size_t j = d.size() >= 2 ? d.size() - 2 : 0; j < d.size(); ++j) b.push_back(std::min<Index>(d[j], 32));
  return b;
}

inline std::vector<BsgsBlockRow> bsgs_encode(const CooTensor& c, std::span<const Index> block_shape,
                                             const TensorId& id) {
  const Shape& dense = c.shape();
  const std::size_t rank = dense.rank();
  const auto b = full_block(dense, block_shape);
  const Shape grid(grid_shape(dense, block_shape));
  const Shape block(b);
  const auto volume = static_cast<std::size_t>(block.element_count());

  // Keyed by linear grid offset, which orders blocks lexicographically.
  std::map<Index, std::vector<double>> blocks;
  std::vector<Index> g(rank), in(rank);
  for (std::size_t k = 0; k < c.nnz(); ++k) {
    auto idx = c.index(k);
    for (std::size_t j = 0; j < rank; ++j) {
      g[j] = idx[j] / b[j];
      in[j] = idx[j] % b[j];
    }
    auto& vals = blocks[grid.linear_offset(g)];
    if (vals.empty()) vals.assign(volume, 0.0);
    vals[static_cast<std::size_t>(block.linear_offset(in))] = c.values()[k];
  }
  std::vector<BsgsBlockRow> rows;
  rows.reserve(blocks.size());
  const std::vector<Index> bs(block_shape.begin(), block_shape.end());
  for (auto& [offset, vals] : blocks) {
    grid.unravel(offset, g);
    rows.push_back({id, dense.dims(), bs, g, std::move(vals)});
  }
  return rows;
}

namespace detail {

struct BlockGeometry {
  Shape dense;
  std::vector<Index> block;  // full rank
  Shape grid;
  Shape block_shape;

  BlockGeometry(std::vector<Index> dense_dims, std::span<const Index> bs)
      : dense(std::move(dense_dims)),
        block(full_block(dense, bs)),
        grid(grid_shape(dense, bs)),
        block_shape(block) {}
};

/// Emits the nonzeros of one block that fall inside `window` (and inside the
/// unpadded tensor), shifted by -window.start.
inline void emit_block(const BlockGeometry& geo, std::span<const Index> grid_idx, std::span<const double> values,
                       std::span<const IndexRange> window, std::vector<Index>& out_idx, std::vector<double>& out_val) {
  const std::size_t rank = geo.dense.rank();
  std::vector<Index> in(rank), global(rank);
  for (Index lin = 0; lin < geo.block_shape.element_count(); ++lin) {
    const double v = values[static_cast<std::size_t>(lin)];
    if (v == 0.0) continue;
    geo.block_shape.unravel(lin, in);
    bool inside = true;
    for (std::size_t j = 0; j < rank && inside; ++j) {
      global[j] = grid_idx[j] * geo.block[j] + in[j];
      inside = global[j] < geo.dense[j] && window[j].contains(global[j]);
    }
    if (!inside) continue;
    for (std::size_t j = 0; j < rank; ++j) out_idx.push_back(global[j] - window[j].start);
    out_val.push_back(v);
  }
}

inline std::vector<IndexRange> whole(const Shape& s) {
  std::vector<IndexRange> r(s.rank());
  for (std::size_t j = 0; j < r.size(); ++j) r[j] = {0, s[j]};
  return r;
}

}  // namespace detail

inline CooTensor bsgs_decode(std::span<const BsgsBlockRow> rows, std::optional<Shape> empty_shape = std::nullopt) {
  if (rows.empty()) {
    if (!empty_shape) fail(ErrorCode::InconsistentMeta, "no block rows and no recorded shape");
    return CooTensor(*empty_shape);
  }
  const auto& first = rows.front();
  const detail::BlockGeometry geo(first.dense_shape, first.block_shape);
  const auto window = detail::whole(geo.dense);
  const auto volume = static_cast<std::size_t>(geo.block_shape.element_count());
  std::vector<Index> seen;
  std::vector<Index> indices;
  std::vector<double> values;
  for (const auto& r : rows) {
    if (!(r.id == first.id) || r.dense_shape != first.dense_shape || r.block_shape != first.block_shape) {
      fail(ErrorCode::InconsistentMeta, "block rows disagree on id, dense_shape or block_shape");
    }
    if (r.values.size() != volume || !geo.grid.contains(r.indices)) {
      fail(ErrorCode::InconsistentMeta, "block row has wrong value count or grid index");
    }
    seen.push_back(geo.grid.linear_offset(r.indices));
    detail::emit_block(geo, r.indices, r.values, window, indices, values);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    fail(ErrorCode::DuplicateBlock, "grid coordinate stored twice");
  }
  return CooTensor::from_entries(geo.dense, std::move(indices), std::move(values));
}

// ----------------------------------------------------------------------
// Table rows

inline store::Row to_table_row(const BsgsBlockRow& r) {
  store::Row row;
  row.set("id", r.id.str())
      .set("dense_shape", store::I64List(r.dense_shape))
      .set("block_shape", store::I64List(r.block_shape))
      .set("indices", store::I64List(r.indices))
      .set("values", store::F64List(r.values));
  return row;
}

inline BsgsBlockRow from_table_row(const store::Row& row) {
  return {TensorId(row.text("id")), row.i64_list("dense_shape"), row.i64_list("block_shape"),
          row.i64_list("indices"), row.f64_list("values")};
}

inline std::vector<BsgsBlockRow> from_table_rows(std::span<const store::Row> rows) {
  std::vector<BsgsBlockRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(from_table_row(r));
  return out;
}

inline store::TensorMeta table_meta(const Shape& dense, std::span<const Index> block_shape) {
  store::TensorMeta meta;
  meta.layout = std::string(kLayout);
  meta.dense_shape = dense.dims();
  meta.attrs["block_shape"] = std::vector<std::int64_t>(block_shape.begin(), block_shape.end());
  return meta;
}

inline void bsgs_write(store::Table& table, const TensorId& id, const Shape& dense, std::span<const Index> block_shape,
                       std::span<const BsgsBlockRow> rows) {
  std::vector<store::Row> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(to_table_row(r));
  table.append_tensor(id, table_meta(dense, block_shape), out);
}

inline CooTensor bsgs_read(const store::Table& table, const TensorId& id, store::ScanStats* stats = nullptr) {
  const auto& meta = table.meta(id);
  auto result = table.scan(id);
  if (stats) *stats += result.stats;
  return bsgs_decode(from_table_rows(result.rows), Shape(meta.dense_shape));
}

/// Slice read with pushdown: only block rows whose covered index box meets
/// `s` are materialized. The result is re-based onto the slice's shape.
inline CooTensor bsgs_read_slice(const store::Table& table, const TensorId& id, const SliceSpec& s,
                                 store::ScanStats* stats = nullptr) {
  // 1. locate the id
  const auto& meta = table.meta(id);
  const Shape dense(meta.dense_shape);
  const auto window = s.resolve(dense);
  const Shape out_shape = s.result_shape(dense);

  // 2-4. shapes come from each row's own columns; keep blocks meeting the slice
  store::Predicate pred{{"dense_shape", "block_shape", "indices"}, [&](const store::Row& row) {
                          const auto b = full_block(Shape(row.i64_list("dense_shape")), row.i64_list("block_shape"));
                          const auto& g = row.i64_list("indices");
                          for (std::size_t j = 0; j < window.size(); ++j) {
                            if (!window[j].overlaps(g[j] * b[j], (g[j] + 1) * b[j])) return false;
                          }
                          return true;
                        }};
  auto result = table.scan_pushdown(id, pred);
  if (stats) *stats += result.stats;

  // 5. reshape each block and place the part inside the slice
  std::vector<Index> indices;
  std::vector<double> values;
  std::optional<detail::BlockGeometry> geo;
  for (const auto& row : result.rows) {
    const auto r = from_table_row(row);
    if (!geo) geo.emplace(r.dense_shape, r.block_shape);
    if (r.values.size() != static_cast<std::size_t>(geo->block_shape.element_count())) {
      fail(ErrorCode::InconsistentMeta, "block row has wrong value count");
    }
    detail::emit_block(*geo, r.indices, r.values, window, indices, values);
  }
  return CooTensor::from_entries(out_shape, std::move(indices), std::move(values));
}

}  // namespace dtensor::bsgs
