#pragma once

// Uniform write/read/slice entry points over the six table layouts.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dtensor/bsgs.hpp"
#include "dtensor/csf.hpp"
#include "dtensor/error.hpp"
#include "dtensor/ftsf.hpp"
#include "dtensor/sparse.hpp"
#include "dtensor/store/table.hpp"
#include "dtensor/tensor.hpp"

namespace dtensor {

enum class Layout { Ftsf, Coo, Csr, Csc, Csf, Bsgs };

inline constexpr Layout kAllLayouts[] = {Layout::Ftsf, Layout::Coo, Layout::Csr,
                                         Layout::Csc,  Layout::Csf, Layout::Bsgs};
inline constexpr Layout kSparseLayouts[] = {Layout::Coo, Layout::Csr, Layout::Csc, Layout::Csf, Layout::Bsgs};

/// Lower-case name used on the command line and in reports.
inline std::string layout_name(Layout l) {
  switch (l) {
    case Layout::Ftsf: return "ftsf";
    case Layout::Coo: return "coo";
    case Layout::Csr: return "csr";
    case Layout::Csc: return "csc";
    case Layout::Csf: return "csf";
    case Layout::Bsgs: return "bsgs";
  }
  return "?";
}

/// Upper-case tag stored in table rows and manifests.
inline std::string layout_tag(Layout l) {
  auto s = layout_name(l);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

inline Layout parse_layout(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Layout l : kAllLayouts) {
    if (layout_name(l) == lower) return l;
  }
  fail(ErrorCode::ParseError, "unknown layout '" + std::string(name) + "'");
}

inline std::string schema_name(Layout l) { return layout_name(l) + ".v1"; }

inline bool is_sparse(Layout l) { return l != Layout::Ftsf; }

/// Layouts whose reader can skip rows outside a slice.
inline bool supports_pushdown(Layout l) { return l != Layout::Csr && l != Layout::Csc; }

struct EncodeOptions {
  std::optional<std::int64_t> chunk_dim;   // FTSF; default rank - 1
  std::int64_t chunk_len = sparse::kDefaultChunkLen;  // CSR/CSC/CSF array chunks
  std::vector<Index> block_shape;          // BSGS; empty selects the default
};

/// A tensor encoded into table rows, ready to append.
struct EncodedTensor {
  TensorId id;
  store::TensorMeta meta;
  std::vector<store::Row> rows;
};

namespace detail {

template <typename Typed, typename Fn>
std::vector<store::Row> to_rows(const std::vector<Typed>& typed, Fn&& convert) {
  std::vector<store::Row> rows;
  rows.reserve(typed.size());
  for (const auto& t : typed) rows.push_back(convert(t));
  return rows;
}

inline store::TensorMeta sparse_meta(Layout l, const Shape& shape, ElementType dtype) {
  store::TensorMeta meta;
  meta.layout = layout_tag(l);
  meta.dense_shape = shape.dims();
  meta.dtype = dtype;
  return meta;
}

}  // namespace detail

/// Encodes a sparse tensor. `source_dtype` is recorded so a dense reader can
/// narrow values back to the element type the caller started from.
inline EncodedTensor encode_sparse(Layout layout, const CooTensor& c, const TensorId& id, const EncodeOptions& opts = {},
                                   ElementType source_dtype = ElementType::F64) {
  switch (layout) {
    case Layout::Ftsf: {
      const DenseTensor dense = cast_dense(coo_to_dense(c), source_dtype);
      const auto chunk_dim = opts.chunk_dim.value_or(static_cast<std::int64_t>(c.rank()) - 1);
      auto rows = ftsf::ftsf_encode(dense, chunk_dim, id);
      return {id, ftsf::table_meta(rows.front().meta),
              detail::to_rows(rows, [](const auto& r) { return ftsf::to_table_row(r); })};
    }
    case Layout::Coo: {
      auto rows = sparse::coo_encode_rows(c, id);
      return {id, detail::sparse_meta(layout, c.shape(), source_dtype),
              detail::to_rows(rows, [](const auto& r) { return sparse::to_table_row(r); })};
    }
    case Layout::Csr:
    case Layout::Csc: {
      const auto e = sparse::csr_encode(c, layout == Layout::Csr ? sparse::Orientation::Row : sparse::Orientation::Col, id);
      return {id, detail::sparse_meta(layout, c.shape(), source_dtype), sparse::csr_to_rows(e, opts.chunk_len)};
    }
    case Layout::Csf: {
      const auto e = csf::csf_encode(c, id);
      auto meta = csf::table_meta(e, opts.chunk_len);
      meta.dtype = source_dtype;
      return {id, std::move(meta), csf::csf_to_rows(e, opts.chunk_len)};
    }
    case Layout::Bsgs: {
      const auto block = opts.block_shape.empty() ? bsgs::default_block_shape(c.shape()) : opts.block_shape;
      auto rows = bsgs::bsgs_encode(c, block, id);
      auto meta = bsgs::table_meta(c.shape(), block);
      meta.dtype = source_dtype;
      return {id, std::move(meta), detail::to_rows(rows, [](const auto& r) { return bsgs::to_table_row(r); })};
    }
  }
  fail(ErrorCode::ParseError, "unhandled layout");
}

inline EncodedTensor encode_dense(Layout layout, const DenseTensor& t, const TensorId& id, const EncodeOptions& opts = {}) {
  if (layout == Layout::Ftsf) {
    const auto chunk_dim = opts.chunk_dim.value_or(static_cast<std::int64_t>(t.rank()) - 1);
    auto rows = ftsf::ftsf_encode(t, chunk_dim, id);
    return {id, ftsf::table_meta(rows.front().meta),
            detail::to_rows(rows, [](const auto& r) { return ftsf::to_table_row(r); })};
  }
  return encode_sparse(layout, dense_to_coo(t), id, opts, t.dtype());
}

inline void write_encoded(store::Table& table, EncodedTensor encoded) {
  table.append_tensor(encoded.id, std::move(encoded.meta), encoded.rows);
}

inline Layout layout_of(const store::Table& table, const TensorId& id) {
  return parse_layout(table.meta(id).layout);
}

/// Decodes rows already fetched for `id` (the decode half of a full read).
inline CooTensor decode_rows_coo(Layout layout, const store::TensorMeta& meta, std::span<const store::Row> rows) {
  const Shape shape(meta.dense_shape);
  switch (layout) {
    case Layout::Ftsf: return dense_to_coo(ftsf::ftsf_decode(ftsf::from_table_rows(rows)));
    case Layout::Coo: {
      std::vector<sparse::CooRow> typed;
      typed.reserve(rows.size());
      for (const auto& r : rows) typed.push_back(sparse::coo_row_from_table(r));
      return sparse::coo_decode_rows(typed, shape);
    }
    case Layout::Csr:
    case Layout::Csc: return sparse::csr_decode(sparse::rows_to_csr(rows));
    case Layout::Csf: return csf::csf_decode(csf::rows_to_csf(rows));
    case Layout::Bsgs: return bsgs::bsgs_decode(bsgs::from_table_rows(rows), shape);
  }
  fail(ErrorCode::ParseError, "unhandled layout");
}

inline CooTensor read_coo(const store::Table& table, const TensorId& id, store::ScanStats* stats = nullptr) {
  const auto& meta = table.meta(id);
  const Layout layout = parse_layout(meta.layout);
  auto result = table.scan(id);
  if (stats) *stats += result.stats;
  return decode_rows_coo(layout, meta, result.rows);
}

/// Full tensor in its recorded element type.
inline DenseTensor read_dense(const store::Table& table, const TensorId& id, store::ScanStats* stats = nullptr) {
  const auto& meta = table.meta(id);
  if (parse_layout(meta.layout) == Layout::Ftsf) return ftsf::ftsf_read(table, id, stats);
  return cast_dense(coo_to_dense(read_coo(table, id, stats)), meta.dtype);
}

namespace detail {

inline bool leading_only(const SliceSpec& s, const Shape& shape, std::size_t lead) {
  const auto r = s.resolve(shape);
  for (std::size_t j = lead; j < r.size(); ++j) {
    if (r[j].start != 0 || r[j].end != shape[j]) return false;
  }
  return true;
}

}  // namespace detail

/// Slice as a re-based sparse tensor, using pushdown where the layout allows.
inline CooTensor read_slice_coo(const store::Table& table, const TensorId& id, const SliceSpec& s,
                                store::ScanStats* stats = nullptr) {
  const auto& meta = table.meta(id);
  const Shape shape(meta.dense_shape);
  const auto window = s.resolve(shape);
  switch (parse_layout(meta.layout)) {
    case Layout::Ftsf: {
      const auto lead = shape.rank() - static_cast<std::size_t>(meta.attrs.at("chunk_dim_count").at(0));
      if (detail::leading_only(s, shape, lead)) return dense_to_coo(ftsf::ftsf_read_slice(table, id, s, stats));
      return slice_coo(dense_to_coo(ftsf::ftsf_read(table, id, stats)), s);
    }
    case Layout::Coo: {
      store::Predicate pred{{"indices"}, [&](const store::Row& row) {
                              const auto& idx = row.i64_list("indices");
                              for (std::size_t j = 0; j < window.size(); ++j) {
                                if (!window[j].contains(idx[j])) return false;
                              }
                              return true;
                            }};
      auto result = table.scan_pushdown(id, pred);
      if (stats) *stats += result.stats;
      return slice_coo(decode_rows_coo(Layout::Coo, meta, result.rows), s);
    }
    case Layout::Csr:
    case Layout::Csc: return slice_coo(read_coo(table, id, stats), s);
    case Layout::Csf: return slice_coo(csf::csf_read_slice(table, id, window[0], stats), s);
    case Layout::Bsgs: return bsgs::bsgs_read_slice(table, id, s, stats);
  }
  fail(ErrorCode::ParseError, "unhandled layout");
}

/// Slice as a dense tensor in the recorded element type.
inline DenseTensor read_slice_dense(const store::Table& table, const TensorId& id, const SliceSpec& s,
                                    store::ScanStats* stats = nullptr) {
  const auto& meta = table.meta(id);
  const Shape shape(meta.dense_shape);
  if (parse_layout(meta.layout) == Layout::Ftsf) {
    const auto lead = shape.rank() - static_cast<std::size_t>(meta.attrs.at("chunk_dim_count").at(0));
    if (detail::leading_only(s, shape, lead)) return ftsf::ftsf_read_slice(table, id, s, stats);
    return slice_dense(ftsf::ftsf_read(table, id, stats), s);
  }
  return cast_dense(coo_to_dense(read_slice_coo(table, id, s, stats)), meta.dtype);
}

}  // namespace dtensor
