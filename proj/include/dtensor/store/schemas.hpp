#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtensor/error.hpp"
#include "dtensor/store/segment.hpp"

namespace dtensor::store {

/// A fixed column set. A schema may have several kinds (e.g. a CSR header
/// row and its chunk rows); each segment holds rows of exactly one kind.
struct RowKind {
  std::string name;
  std::vector<ColumnSpec> columns;

  bool matches(const Row& row) const {
    if (row.size() != columns.size()) return false;
    for (const auto& col : columns) {
      if (!row.has(col.name) || type_of(row.get(col.name)) != col.type) return false;
    }
    return true;
  }

  /// Reorders `row` into this kind's column order.
  Row normalize(const Row& row) const {
    Row out;
    for (const auto& col : columns) out.set(col.name, row.get(col.name));
    return out;
  }

  bool has_column(std::string_view name) const {
    for (const auto& col : columns) {
      if (col.name == name) return true;
    }
    return false;
  }
};

struct Schema {
  std::string name;
  std::vector<RowKind> kinds;

  const RowKind* match(const Row& row) const {
    for (const auto& k : kinds) {
      if (k.matches(row)) return &k;
    }
    return nullptr;
  }

  const RowKind& kind(std::string_view kind_name) const {
    for (const auto& k : kinds) {
      if (k.name == kind_name) return k;
    }
    fail(ErrorCode::SchemaViolation, "schema " + name + " has no row kind '" + std::string(kind_name) + "'");
  }

  bool has_column(std::string_view column) const {
    for (const auto& k : kinds) {
      if (k.has_column(column)) return true;
    }
    return false;
  }
};

namespace schemas {

using T = ColumnType;

inline const Schema& ftsf() {
  static const Schema s{"ftsf.v1",
                        {{"chunk",
                          {{"id", T::Text},
                           {"chunk_index", T::I64},
                           {"chunk", T::Bytes},
                           {"dim_count", T::I64},
                           {"dimensions", T::I64List},
                           {"chunk_dim_count", T::I64},
                           {"dtype", T::I64}}}}};
  return s;
}

inline const Schema& coo() {
  static const Schema s{"coo.v1",
                        {{"entry",
                          {{"id", T::Text},
                           {"layout", T::Text},
                           {"dense_shape", T::I64List},
                           {"indices", T::I64List},
                           {"value", T::F64}}}}};
  return s;
}

inline Schema compressed(std::string name) {
  return Schema{std::move(name),
                {{"header",
                  {{"id", T::Text},
                   {"layout", T::Text},
                   {"dense_shape", T::I64List},
                   {"flattened_shape", T::I64List},
                   {"pointer_array", T::I64List}}},
                 {"chunk",
                  {{"id", T::Text}, {"chunk_seq", T::I64}, {"minor_indices", T::I64List}, {"values", T::F64List}}}}};
}

inline const Schema& csr() {
  static const Schema s = compressed("csr.v1");
  return s;
}

inline const Schema& csc() {
  static const Schema s = compressed("csc.v1");
  return s;
}

inline const Schema& csf() {
  static const Schema s{"csf.v1",
                        {{"header",
                          {{"id", T::Text},
                           {"layout", T::Text},
                           {"dense_shape", T::I64List},
                           {"fptr_zero", T::I64List},
                           {"fid_zero", T::I64List},
                           {"fptr_one", T::I64List},
                           {"fid_one", T::I64List},
                           {"chunk_len", T::I64}}},
                         {"i64_chunk",
                          {{"id", T::Text}, {"array_kind", T::Text}, {"chunk_seq", T::I64}, {"i64_payload", T::I64List}}},
                         {"f64_chunk",
                          {{"id", T::Text}, {"array_kind", T::Text}, {"chunk_seq", T::I64}, {"f64_payload", T::F64List}}}}};
  return s;
}

inline const Schema& bsgs() {
  static const Schema s{"bsgs.v1",
                        {{"block",
                          {{"id", T::Text},
                           {"dense_shape", T::I64List},
                           {"block_shape", T::I64List},
                           {"indices", T::I64List},
                           {"values", T::F64List}}}}};
  return s;
}

inline const Schema& by_name(std::string_view name) {
  for (const Schema* s : {&ftsf(), &coo(), &csr(), &csc(), &csf(), &bsgs()}) {
    if (s->name == name) return *s;
  }
  fail(ErrorCode::SchemaViolation, "unknown schema '" + std::string(name) + "'");
}

}  // namespace schemas
}  // namespace dtensor::store
