#pragma once

// COO table rows and CSR/CSC encodings of flattened tensors.

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

namespace dtensor::sparse {

inline constexpr std::int64_t kDefaultChunkLen = 65536;

// ----------------------------------------------------------------------
// COO

struct CooRow {
  TensorId id;
  std::string layout = "COO";
  std::vector<Index> dense_shape;
  std::vector<Index> indices;
  double value = 0.0;

  friend bool operator==(const CooRow&, const CooRow&) = default;
};

inline std::vector<CooRow> coo_encode_rows(const CooTensor& c, const TensorId& id) {
  std::vector<CooRow> rows;
  rows.reserve(c.nnz());
  for (std::size_t k = 0; k < c.nnz(); ++k) {
    auto idx = c.index(k);
    rows.push_back({id, "COO", c.shape().dims(), std::vector<Index>(idx.begin(), idx.end()), c.values()[k]});
  }
  return rows;
}

/// `empty_shape` supplies the shape when there are no rows (an all-zero
/// tensor has no COO rows; its shape lives in the table manifest).
inline CooTensor coo_decode_rows(std::span<const CooRow> rows, std::optional<Shape> empty_shape = std::nullopt) {
  if (rows.empty()) {
    if (!empty_shape) fail(ErrorCode::InconsistentShape, "no rows and no recorded shape");
    return CooTensor(*empty_shape);
  }
  const auto& first = rows.front();
  Shape shape(first.dense_shape);
  std::vector<Index> indices;
  std::vector<double> values;
  indices.reserve(rows.size() * shape.rank());
  values.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.dense_shape != first.dense_shape || !(r.id == first.id) || r.layout != first.layout) {
      fail(ErrorCode::InconsistentShape, "COO rows disagree on id, layout or dense_shape");
    }
    if (r.indices.size() != shape.rank()) fail(ErrorCode::InconsistentShape, "index width differs from rank");
    indices.insert(indices.end(), r.indices.begin(), r.indices.end());
    values.push_back(r.value);
  }
  return CooTensor::from_entries(std::move(shape), std::move(indices), std::move(values));
}

inline store::Row to_table_row(const CooRow& r) {
  store::Row row;
  row.set("id", r.id.str())
      .set("layout", r.layout)
      .set("dense_shape", store::I64List(r.dense_shape))
      .set("indices", store::I64List(r.indices))
      .set("value", r.value);
  return row;
}

inline CooRow coo_row_from_table(const store::Row& row) {
  return {TensorId(row.text("id")), row.text("layout"), row.i64_list("dense_shape"), row.i64_list("indices"),
          row.f64("value")};
}

// ----------------------------------------------------------------------
// Flattening

enum class Orientation { Row, Col };

struct FlattenedMatrix {
  CooTensor matrix;  // rank-2, sorted (row, col)
  std::vector<Index> flattened_shape;
};

/// Flattened [rows, cols] shape. Row orientation keeps d_1 as the row
/// dimension and folds the trailing dimensions into columns; column
/// orientation keeps d_N as the column dimension and folds the leading ones
/// into rows. Either way the compressed (major) dimension is one original
/// dimension, so the pointer array stays small. Rank 1 maps to [d_1, 1].
inline std::vector<Index> flattened_shape(const Shape& shape, Orientation o = Orientation::Row) {
  const auto& d = shape.dims();
  if (d.size() == 1) return {d[0], 1};
  if (o == Orientation::Row) return {d[0], shape.element_count() / d[0]};
  return {shape.element_count() / d.back(), d.back()};
}

inline FlattenedMatrix flatten_to_matrix(const CooTensor& c, Orientation o = Orientation::Row) {
  auto fshape = flattened_shape(c.shape(), o);
  const std::size_t rank = c.rank();
  std::vector<Index> out;
  out.reserve(c.nnz() * 2);
  for (std::size_t k = 0; k < c.nnz(); ++k) {
    auto idx = c.index(k);
    if (rank == 1) {
      out.push_back(idx[0]);
      out.push_back(0);
    } else if (o == Orientation::Row) {
      Index col = 0;
      for (std::size_t j = 1; j < rank; ++j) col = col * c.shape()[j] + idx[j];
      out.push_back(idx[0]);
      out.push_back(col);
    } else {
      Index row = 0;
      for (std::size_t j = 0; j + 1 < rank; ++j) row = row * c.shape()[j] + idx[j];
      out.push_back(row);
      out.push_back(idx[rank - 1]);
    }
  }
  // Both mappings are monotone in lexicographic order, so the result stays sorted.
  std::vector<double> values(c.values().begin(), c.values().end());
  return {CooTensor::from_sorted(Shape(fshape), std::move(out), std::move(values)), fshape};
}

/// Inverse of flatten_to_matrix for a single matrix coordinate.
inline void unflatten_index(const Shape& dense, Orientation o, Index row, Index col, std::span<Index> out) {
  const std::size_t rank = dense.rank();
  if (rank == 1) {
    out[0] = row;
    return;
  }
  if (o == Orientation::Row) {
    out[0] = row;
    for (std::size_t j = rank; j-- > 1;) {
      out[j] = col % dense[j];
      col /= dense[j];
    }
  } else {
    out[rank - 1] = col;
    for (std::size_t j = rank - 1; j-- > 0;) {
      out[j] = row % dense[j];
      row /= dense[j];
    }
  }
}

// ----------------------------------------------------------------------
// CSR / CSC

struct CsrEncoded {
  TensorId id;
  std::string layout;  // "CSR" or "CSC"
  std::vector<Index> dense_shape;
  std::vector<Index> flattened_shape;
  std::vector<Index> pointer_array;
  std::vector<Index> minor_indices;
  std::vector<double> values;

  Orientation orientation() const { return layout == "CSC" ? Orientation::Col : Orientation::Row; }
  friend bool operator==(const CsrEncoded&, const CsrEncoded&) = default;
};

inline CsrEncoded csr_encode(const CooTensor& c, Orientation o, const TensorId& id) {
  auto flat = flatten_to_matrix(c, o);
  const Index rows = flat.flattened_shape[0];
  const Index cols = flat.flattened_shape[1];
  const Index major_dim = o == Orientation::Row ? rows : cols;
  const std::size_t nnz = c.nnz();

  CsrEncoded e{id, o == Orientation::Row ? "CSR" : "CSC", c.shape().dims(), flat.flattened_shape, {}, {}, {}};
  e.pointer_array.assign(static_cast<std::size_t>(major_dim) + 1, 0);
  const auto mi = flat.matrix.indices();
  auto major_of = [&](std::size_t k) { return o == Orientation::Row ? mi[2 * k] : mi[2 * k + 1]; };
  auto minor_of = [&](std::size_t k) { return o == Orientation::Row ? mi[2 * k + 1] : mi[2 * k]; };
  for (std::size_t k = 0; k < nnz; ++k) ++e.pointer_array[static_cast<std::size_t>(major_of(k)) + 1];
  for (std::size_t m = 1; m < e.pointer_array.size(); ++m) e.pointer_array[m] += e.pointer_array[m - 1];

  // Stable counting sort by major index; the matrix is (row, col)-sorted, so
  // minor indices come out increasing within each segment.
  e.minor_indices.resize(nnz);
  e.values.resize(nnz);
  std::vector<Index> cursor(e.pointer_array.begin(), e.pointer_array.end() - 1);
  for (std::size_t k = 0; k < nnz; ++k) {
    const auto pos = static_cast<std::size_t>(cursor[static_cast<std::size_t>(major_of(k))]++);
    e.minor_indices[pos] = minor_of(k);
    e.values[pos] = flat.matrix.values()[k];
  }
  return e;
}

inline void validate_csr(const CsrEncoded& e) {
  if (e.layout != "CSR" && e.layout != "CSC") fail(ErrorCode::InconsistentMeta, "layout '" + e.layout + "'");
  const Shape dense(e.dense_shape);
  if (e.flattened_shape != flattened_shape(dense, e.orientation())) {
    fail(ErrorCode::InconsistentShape, "flattened_shape does not match dense_shape");
  }
  const Index major_dim = e.orientation() == Orientation::Row ? e.flattened_shape[0] : e.flattened_shape[1];
  const Index minor_dim = e.orientation() == Orientation::Row ? e.flattened_shape[1] : e.flattened_shape[0];
  const auto& p = e.pointer_array;
  if (p.size() != static_cast<std::size_t>(major_dim) + 1) {
    fail(ErrorCode::MalformedPointers, "pointer array has " + std::to_string(p.size()) + " entries, expected " +
                                           std::to_string(major_dim + 1));
  }
  if (e.minor_indices.size() != e.values.size()) fail(ErrorCode::MalformedPointers, "minor/values length differ");
  if (p.front() != 0) fail(ErrorCode::MalformedPointers, "pointer array must start at 0");
  if (p.back() != static_cast<Index>(e.values.size())) fail(ErrorCode::MalformedPointers, "last pointer != nnz");
  for (std::size_t m = 0; m + 1 < p.size(); ++m) {
    if (p[m + 1] < p[m]) fail(ErrorCode::MalformedPointers, "pointer array decreases at " + std::to_string(m));
    for (Index k = p[m]; k < p[m + 1]; ++k) {
      const Index minor = e.minor_indices[static_cast<std::size_t>(k)];
      if (minor < 0 || minor >= minor_dim) fail(ErrorCode::MalformedPointers, "minor index out of range");
      if (k > p[m] && minor <= e.minor_indices[static_cast<std::size_t>(k - 1)]) {
        fail(ErrorCode::MalformedPointers, "minor indices not strictly increasing in segment " + std::to_string(m));
      }
    }
  }
}

inline CooTensor csr_decode(const CsrEncoded& e) {
  validate_csr(e);
  const Shape dense(e.dense_shape);
  const std::size_t rank = dense.rank();
  const auto o = e.orientation();
  std::vector<Index> indices(e.values.size() * rank);
  for (std::size_t m = 0; m + 1 < e.pointer_array.size(); ++m) {
    for (Index k = e.pointer_array[m]; k < e.pointer_array[m + 1]; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const Index major = static_cast<Index>(m);
      const Index minor = e.minor_indices[kk];
      const Index row = o == Orientation::Row ? major : minor;
      const Index col = o == Orientation::Row ? minor : major;
      unflatten_index(dense, o, row, col, std::span<Index>(indices.data() + kk * rank, rank));
    }
  }
  // CSR order is already lexicographic; CSC needs a re-sort.
  if (o == Orientation::Row) return CooTensor::from_sorted(dense, std::move(indices), e.values);
  return CooTensor::from_entries(dense, std::move(indices), e.values);
}

/// One header row (shapes and pointer array) plus ceil(nnz / chunk_len)
/// chunk rows carrying contiguous slices of minor_indices and values.
inline std::vector<store::Row> csr_to_rows(const CsrEncoded& e, std::int64_t chunk_len = kDefaultChunkLen) {
  if (chunk_len < 1) fail(ErrorCode::BadChunkDim, "chunk_len must be >= 1");
  std::vector<store::Row> rows;
  store::Row header;
  header.set("id", e.id.str())
      .set("layout", e.layout)
      .set("dense_shape", store::I64List(e.dense_shape))
      .set("flattened_shape", store::I64List(e.flattened_shape))
      .set("pointer_array", store::I64List(e.pointer_array));
  rows.push_back(std::move(header));
  const auto n = e.values.size();
  const auto step = static_cast<std::size_t>(chunk_len);
  for (std::size_t off = 0, seq = 0; off < n; off += step, ++seq) {
    const auto end = std::min(n, off + step);
    store::Row chunk;
    chunk.set("id", e.id.str())
        .set("chunk_seq", static_cast<std::int64_t>(seq))
        .set("minor_indices", store::I64List(e.minor_indices.begin() + static_cast<std::ptrdiff_t>(off),
                                             e.minor_indices.begin() + static_cast<std::ptrdiff_t>(end)))
        .set("values", store::F64List(e.values.begin() + static_cast<std::ptrdiff_t>(off),
                                      e.values.begin() + static_cast<std::ptrdiff_t>(end)));
    rows.push_back(std::move(chunk));
  }
  return rows;
}

inline CsrEncoded rows_to_csr(std::span<const store::Row> rows) {
  const store::Row* header = nullptr;
  std::map<std::int64_t, const store::Row*> chunks;
  for (const auto& r : rows) {
    if (r.has("pointer_array")) {
      if (header) fail(ErrorCode::InconsistentMeta, "more than one CSR header row");
      header = &r;
    } else if (!chunks.emplace(r.i64("chunk_seq"), &r).second) {
      fail(ErrorCode::InconsistentMeta, "duplicate chunk_seq " + std::to_string(r.i64("chunk_seq")));
    }
  }
  if (!header) fail(ErrorCode::MissingChunk, "no CSR header row");
  CsrEncoded e{TensorId(header->text("id")),
               header->text("layout"),
               header->i64_list("dense_shape"),
               header->i64_list("flattened_shape"),
               header->i64_list("pointer_array"),
               {},
               {}};
  std::int64_t expect = 0;
  for (const auto& [seq, r] : chunks) {
    if (seq != expect++) fail(ErrorCode::MissingChunk, "chunk " + std::to_string(expect - 1) + " missing");
    if (r->text("id") != e.id.str()) fail(ErrorCode::InconsistentMeta, "chunk belongs to another id");
    const auto& mi = r->i64_list("minor_indices");
    const auto& vs = r->f64_list("values");
    e.minor_indices.insert(e.minor_indices.end(), mi.begin(), mi.end());
    e.values.insert(e.values.end(), vs.begin(), vs.end());
  }
  return e;
}

}  // namespace dtensor::sparse
