#pragma once

// Compressed Sparse Fiber. The sorted nonzeros form a tree with one level per
// dimension: level k holds, for every distinct coordinate prefix of length
// k+1, the index at dimension k (fids[k]); fptrs[k] delimits each node's
// children in level k+1. Leaves align one-to-one with values, so the last
// level has no pointer array.
//
// Persistence keeps the first two levels in a single header row and splits
// every deeper array (and the values) into fixed-length chunk rows.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dtensor/error.hpp"
#include "dtensor/store/table.hpp"
#include "dtensor/tensor.hpp"

namespace dtensor::csf {

inline constexpr std::string_view kLayout = "CSF";
inline constexpr std::int64_t kDefaultChunkLen = 65536;

struct CsfEncoded {
  TensorId id;
  std::vector<Index> dense_shape;
  std::vector<std::vector<Index>> fids;   // N levels
  std::vector<std::vector<Index>> fptrs;  // N-1 levels
  std::vector<double> values;

  std::size_t rank() const { return dense_shape.size(); }
  friend bool operator==(const CsfEncoded&, const CsfEncoded&) = default;
};

/// "csf-{N}d-{12 hex}".
inline TensorId generate_id(std::string_view prefix, std::size_t rank) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::random_device rd;
  std::mt19937_64 gen((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  std::string s = std::string(prefix) + "-" + std::to_string(rank) + "d-";
  auto bits = gen();
  for (int i = 0; i < 12; ++i, bits >>= 4) s.push_back(kHex[bits & 0xf]);
  return TensorId(std::move(s));
}

/// Single breadth-consistent pass over the sorted coordinates: an entry opens
/// a new node at every level from the first dimension where it differs from
/// the previous entry down to the leaf.
inline CsfEncoded csf_encode(const CooTensor& c, const TensorId& id) {
  const std::size_t rank = c.rank();
  if (rank < 2) fail(ErrorCode::RankTooLow, "CSF needs rank >= 2; store rank-1 tensors as COO");
  CsfEncoded e{id, c.shape().dims(), std::vector<std::vector<Index>>(rank),
               std::vector<std::vector<Index>>(rank - 1), std::vector<double>(c.values().begin(), c.values().end())};
  for (std::size_t k = 0; k < c.nnz(); ++k) {
    auto idx = c.index(k);
    std::size_t split = 0;
    if (k > 0) {
      auto prev = c.index(k - 1);
      while (split < rank && prev[split] == idx[split]) ++split;
    }
    for (std::size_t level = split; level < rank; ++level) {
      if (level + 1 < rank) e.fptrs[level].push_back(static_cast<Index>(e.fids[level + 1].size()));
      e.fids[level].push_back(idx[level]);
    }
  }
  for (std::size_t level = 0; level + 1 < rank; ++level) {
    e.fptrs[level].push_back(static_cast<Index>(e.fids[level + 1].size()));
  }
  return e;
}

inline void validate_csf(const CsfEncoded& e) {
  const std::size_t rank = e.rank();
  if (rank < 2) fail(ErrorCode::RankTooLow, "CSF needs rank >= 2");
  if (e.fids.size() != rank || e.fptrs.size() != rank - 1) {
    fail(ErrorCode::MalformedPointers, "level count does not match rank");
  }
  if (e.values.size() != e.fids[rank - 1].size()) {
    fail(ErrorCode::LengthMismatch, std::to_string(e.values.size()) + " values for " +
                                        std::to_string(e.fids[rank - 1].size()) + " leaves");
  }
  for (std::size_t k = 0; k + 1 < rank; ++k) {
    const auto& p = e.fptrs[k];
    if (p.size() != e.fids[k].size() + 1 || p.front() != 0 ||
        p.back() != static_cast<Index>(e.fids[k + 1].size())) {
      fail(ErrorCode::MalformedPointers, "fptrs[" + std::to_string(k) + "] does not delimit level " +
                                             std::to_string(k + 1));
    }
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
      if (p[i + 1] <= p[i]) fail(ErrorCode::MalformedPointers, "empty or reversed fiber at level " + std::to_string(k));
    }
  }
}

/// Depth-first expansion; output is lexicographically sorted by construction.
inline CooTensor csf_decode(const CsfEncoded& e) {
  validate_csf(e);
  const std::size_t rank = e.rank();
  std::vector<Index> indices(e.values.size() * rank);
  std::vector<Index> path(rank);
  std::size_t leaf = 0;
  auto visit = [&](auto&& self, std::size_t level, Index node) -> void {
    path[level] = e.fids[level][static_cast<std::size_t>(node)];
    if (level + 1 == rank) {
      std::copy(path.begin(), path.end(), indices.begin() + static_cast<std::ptrdiff_t>(leaf * rank));
      ++leaf;
      return;
    }
    const auto& p = e.fptrs[level];
    for (Index child = p[static_cast<std::size_t>(node)]; child < p[static_cast<std::size_t>(node) + 1]; ++child) {
      self(self, level + 1, child);
    }
  };
  for (Index root = 0; root < static_cast<Index>(e.fids[0].size()); ++root) visit(visit, 0, root);
  return CooTensor::from_sorted(Shape(e.dense_shape), std::move(indices), e.values);
}

// ----------------------------------------------------------------------
// Table rows

inline std::string fids_kind(std::size_t level) { return "fids" + std::to_string(level); }
inline std::string fptrs_kind(std::size_t level) { return "fptrs" + std::to_string(level); }
inline constexpr std::string_view kValuesKind = "values";

namespace detail {

template <typename T>
void push_chunks(std::vector<store::Row>& out, const TensorId& id, const std::string& kind,
                 const std::vector<T>& data, std::int64_t chunk_len) {
  const auto step = static_cast<std::size_t>(chunk_len);
  for (std::size_t off = 0, seq = 0; off < data.size(); off += step, ++seq) {
    const auto end = std::min(data.size(), off + step);
    std::vector<T> piece(data.begin() + static_cast<std::ptrdiff_t>(off), data.begin() + static_cast<std::ptrdiff_t>(end));
    store::Row row;
    row.set("id", id.str()).set("array_kind", kind).set("chunk_seq", static_cast<std::int64_t>(seq));
    if constexpr (std::is_same_v<T, double>) {
      row.set("f64_payload", std::move(piece));
    } else {
      row.set("i64_payload", std::move(piece));
    }
    out.push_back(std::move(row));
  }
}

/// A contiguous window [offset, offset + data.size()) of a chunked array.
template <typename T>
struct Window {
  Index offset = 0;
  std::vector<T> data;

  const T& at(Index i) const {
    if (i < offset || i >= offset + static_cast<Index>(data.size())) {
      fail(ErrorCode::MissingChunk, "entry " + std::to_string(i) + " outside fetched chunks");
    }
    return data[static_cast<std::size_t>(i - offset)];
  }
};

template <typename T>
Window<T> assemble(const std::vector<const store::Row*>& rows, std::string_view payload_col, std::int64_t chunk_len) {
  std::map<std::int64_t, const store::Row*> by_seq;
  for (const auto* r : rows) {
    if (!by_seq.emplace(r->i64("chunk_seq"), r).second) fail(ErrorCode::InconsistentMeta, "duplicate chunk");
  }
  Window<T> w;
  if (by_seq.empty()) return w;
  std::int64_t expect = by_seq.begin()->first;
  w.offset = expect * chunk_len;
  for (const auto& [seq, r] : by_seq) {
    if (seq != expect++) fail(ErrorCode::MissingChunk, "chunk " + std::to_string(expect - 1) + " missing");
    const auto& v = std::get<std::vector<T>>(r->get(payload_col));
    w.data.insert(w.data.end(), v.begin(), v.end());
  }
  return w;
}

}  // namespace detail

inline std::vector<store::Row> csf_to_rows(const CsfEncoded& e, std::int64_t chunk_len = kDefaultChunkLen) {
  if (chunk_len < 1) fail(ErrorCode::BadChunkDim, "chunk_len must be >= 1");
  const std::size_t rank = e.rank();
  std::vector<store::Row> rows;
  store::Row header;
  header.set("id", e.id.str())
      .set("layout", std::string(kLayout))
      .set("dense_shape", store::I64List(e.dense_shape))
      .set("fptr_zero", store::I64List(e.fptrs[0]))
      .set("fid_zero", store::I64List(e.fids[0]))
      .set("fptr_one", rank > 2 ? store::I64List(e.fptrs[1]) : store::I64List{})
      .set("fid_one", store::I64List(e.fids[1]))
      .set("chunk_len", chunk_len);
  rows.push_back(std::move(header));
  for (std::size_t level = 2; level < rank; ++level) {
    detail::push_chunks(rows, e.id, fids_kind(level), e.fids[level], chunk_len);
    if (level + 1 < rank) detail::push_chunks(rows, e.id, fptrs_kind(level), e.fptrs[level], chunk_len);
  }
  detail::push_chunks(rows, e.id, std::string(kValuesKind), e.values, chunk_len);
  return rows;
}

inline CsfEncoded rows_to_csf(std::span<const store::Row> rows) {
  const store::Row* header = nullptr;
  std::map<std::string, std::vector<const store::Row*>> arrays;
  for (const auto& r : rows) {
    if (r.has("fid_zero")) {
      if (header) fail(ErrorCode::InconsistentMeta, "more than one CSF header row");
      header = &r;
    } else {
      arrays[r.text("array_kind")].push_back(&r);
    }
  }
  if (!header) fail(ErrorCode::MissingChunk, "no CSF header row");
  const auto dense = header->i64_list("dense_shape");
  const std::size_t rank = dense.size();
  if (rank < 2) fail(ErrorCode::RankTooLow, "CSF header with rank < 2");
  const auto chunk_len = header->i64("chunk_len");
  CsfEncoded e{TensorId(header->text("id")), dense, std::vector<std::vector<Index>>(rank),
               std::vector<std::vector<Index>>(rank - 1), {}};
  e.fptrs[0] = header->i64_list("fptr_zero");
  e.fids[0] = header->i64_list("fid_zero");
  e.fids[1] = header->i64_list("fid_one");
  if (rank > 2) e.fptrs[1] = header->i64_list("fptr_one");
  auto whole = [&](const std::string& kind, std::string_view col, auto proto) {
    using T = decltype(proto);
    auto w = detail::assemble<T>(arrays[kind], col, chunk_len);
    if (w.offset != 0) fail(ErrorCode::MissingChunk, "first chunk of " + kind + " missing");
    return std::move(w.data);
  };
  for (std::size_t level = 2; level < rank; ++level) {
    e.fids[level] = whole(fids_kind(level), "i64_payload", Index{});
    if (level + 1 < rank) e.fptrs[level] = whole(fptrs_kind(level), "i64_payload", Index{});
  }
  e.values = whole(std::string(kValuesKind), "f64_payload", double{});
  return e;
}

inline store::TensorMeta table_meta(const CsfEncoded& e, std::int64_t chunk_len) {
  store::TensorMeta meta;
  meta.layout = std::string(kLayout);
  meta.dense_shape = e.dense_shape;
  meta.attrs["chunk_len"] = {chunk_len};
  return meta;
}

inline void csf_write(store::Table& table, const CsfEncoded& e, std::int64_t chunk_len = kDefaultChunkLen) {
  table.append_tensor(e.id, table_meta(e, chunk_len), csf_to_rows(e, chunk_len));
}

inline CooTensor csf_read(const store::Table& table, const TensorId& id, store::ScanStats* stats = nullptr) {
  table.meta(id);
  auto result = table.scan(id);
  if (stats) *stats += result.stats;
  return csf_decode(rows_to_csf(result.rows));
}

/// Nonzeros whose first index lies in `first_dim`, with coordinates left in
/// the original index space. The header's level-0/1 arrays bound which chunk
/// rows of the deeper levels are fetched.
inline CooTensor csf_read_slice(const store::Table& table, const TensorId& id, IndexRange first_dim,
                                store::ScanStats* stats = nullptr) {
  const auto& meta = table.meta(id);
  const Shape shape(meta.dense_shape);
  const std::size_t rank = shape.rank();
  if (first_dim.start < 0 || first_dim.start >= first_dim.end || first_dim.end > shape[0]) {
    fail(ErrorCode::RangeOutOfBounds, "first-dimension range outside [0, " + std::to_string(shape[0]) + ")");
  }
  store::ScanStats local;
  auto header_scan = table.scan(id, "header");
  local += header_scan.stats;
  if (header_scan.rows.size() != 1) fail(ErrorCode::MissingChunk, "expected one CSF header row");
  const auto& header = header_scan.rows.front();
  const auto chunk_len = header.i64("chunk_len");
  const auto& fid_zero = header.i64_list("fid_zero");
  const auto& fptr_zero = header.i64_list("fptr_zero");

  const auto p0 = std::lower_bound(fid_zero.begin(), fid_zero.end(), first_dim.start) - fid_zero.begin();
  const auto p1 = std::lower_bound(fid_zero.begin(), fid_zero.end(), first_dim.end) - fid_zero.begin();
  if (p0 == p1) {
    if (stats) *stats += local;
    return CooTensor(shape);
  }

  // Node ranges [lo[k], hi[k]) per level, plus the windows needed to expand them.
  std::vector<Index> lo(rank), hi(rank);
  std::vector<detail::Window<Index>> fids(rank), fptrs(rank - 1);
  lo[0] = p0;
  hi[0] = p1;
  fids[0] = {0, fid_zero};
  fptrs[0] = {0, fptr_zero};
  fids[1] = {0, header.i64_list("fid_one")};
  if (rank > 2) fptrs[1] = {0, header.i64_list("fptr_one")};

  auto seq_span = [&](Index first, Index last_inclusive) {
    return std::pair<std::int64_t, std::int64_t>{first / chunk_len, last_inclusive / chunk_len};
  };
  auto fetch_i64 = [&](const std::vector<std::pair<std::string, std::pair<std::int64_t, std::int64_t>>>& wanted) {
    store::Predicate pred{{"array_kind", "chunk_seq"}, [&](const store::Row& row) {
                            const auto& kind = row.text("array_kind");
                            const auto seq = row.i64("chunk_seq");
                            for (const auto& [k, span] : wanted) {
                              if (k == kind && seq >= span.first && seq <= span.second) return true;
                            }
                            return false;
                          }};
    auto r = table.scan_pushdown(id, pred, "i64_chunk");
    local += r.stats;
    return r.rows;
  };

  for (std::size_t level = 1; level < rank; ++level) {
    lo[level] = fptrs[level - 1].at(lo[level - 1]);
    hi[level] = fptrs[level - 1].at(hi[level - 1]);
    if (level < 2) continue;
    // Fetch fids[level] over [lo, hi) and, for inner levels, fptrs[level] over [lo, hi].
    std::vector<std::pair<std::string, std::pair<std::int64_t, std::int64_t>>> wanted{
        {fids_kind(level), seq_span(lo[level], hi[level] - 1)}};
    const bool inner = level + 1 < rank;
    if (inner) wanted.push_back({fptrs_kind(level), seq_span(lo[level], hi[level])});
    auto rows = fetch_i64(wanted);
    std::vector<const store::Row*> fid_rows, fptr_rows;
    for (const auto& r : rows) (r.text("array_kind") == fids_kind(level) ? fid_rows : fptr_rows).push_back(&r);
    fids[level] = detail::assemble<Index>(fid_rows, "i64_payload", chunk_len);
    if (inner) fptrs[level] = detail::assemble<Index>(fptr_rows, "i64_payload", chunk_len);
  }

  const auto leaf = rank - 1;
  const auto value_span = seq_span(lo[leaf], hi[leaf] - 1);
  store::Predicate value_pred{{"array_kind", "chunk_seq"}, [&](const store::Row& row) {
                                const auto seq = row.i64("chunk_seq");
                                return row.text("array_kind") == kValuesKind && seq >= value_span.first &&
                                       seq <= value_span.second;
                              }};
  auto value_scan = table.scan_pushdown(id, value_pred, "f64_chunk");
  local += value_scan.stats;
  std::vector<const store::Row*> value_rows;
  for (const auto& r : value_scan.rows) value_rows.push_back(&r);
  const auto values = detail::assemble<double>(value_rows, "f64_payload", chunk_len);

  std::vector<Index> indices;
  std::vector<double> out_values;
  std::vector<Index> path(rank);
  auto visit = [&](auto&& self, std::size_t level, Index node) -> void {
    path[level] = fids[level].at(node);
    if (level == leaf) {
      indices.insert(indices.end(), path.begin(), path.end());
      out_values.push_back(values.at(node));
      return;
    }
    for (Index child = fptrs[level].at(node); child < fptrs[level].at(node + 1); ++child) self(self, level + 1, child);
  };
  for (Index root = p0; root < p1; ++root) visit(visit, 0, root);
  if (stats) *stats += local;
  return CooTensor::from_sorted(shape, std::move(indices), std::move(out_values));
}

}  // namespace dtensor::csf
