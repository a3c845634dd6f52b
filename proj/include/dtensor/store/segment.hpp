#pragma once

// Columnar segment file ("DTBL", version 1). Layout, all integers little-endian:
//
//   magic "DTBL" | u16 version | u16 len + schema name | u16 column count | u64 row count
//   per column:
//     u16 len + name | u8 type tag | u8 encoding | u64 payload length | u32 CRC32 | payload
//
// Plain payloads pack I64/F64 values directly; Text/Bytes carry a u32 length
// per value; lists carry a u32 count followed by packed elements. Dict-RLE
// payloads are: u32 dict size, dict entries in plain form, u32 run count,
// then (u32 dict index, u32 run length) pairs.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <zlib.h>

#include "dtensor/bytes.hpp"
#include "dtensor/error.hpp"

namespace dtensor::store {

inline constexpr std::uint16_t kSegmentVersion = 1;

enum class ColumnType : std::uint8_t { Text = 0, I64 = 1, F64 = 2, Bytes = 3, I64List = 4, F64List = 5 };

enum class ColumnEncoding : std::uint8_t { Plain = 0, DictRle = 1 };

using I64List = std::vector<std::int64_t>;
using F64List = std::vector<double>;

// Alternative order matches ColumnType tags.
using ColumnValue = std::variant<std::string, std::int64_t, double, Bytes, I64List, F64List>;

inline ColumnType type_of(const ColumnValue& v) { return static_cast<ColumnType>(v.index()); }

inline std::string_view to_string(ColumnType t) {
  switch (t) {
    case ColumnType::Text: return "Text";
    case ColumnType::I64: return "I64";
    case ColumnType::F64: return "F64";
    case ColumnType::Bytes: return "Bytes";
    case ColumnType::I64List: return "I64List";
    case ColumnType::F64List: return "F64List";
  }
  return "?";
}

struct ColumnSpec {
  std::string name;
  ColumnType type;
  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// One table record: named cells in schema column order.
class Row {
 public:
  Row() = default;

  Row& set(std::string name, ColumnValue value) {
    for (auto& [n, v] : cells_) {
      if (n == name) {
        v = std::move(value);
        return *this;
      }
    }
    cells_.emplace_back(std::move(name), std::move(value));
    return *this;
  }

  bool has(std::string_view name) const {
    for (const auto& [n, v] : cells_) {
      if (n == name) return true;
    }
    return false;
  }

  const ColumnValue& get(std::string_view name) const {
    for (const auto& [n, v] : cells_) {
      if (n == name) return v;
    }
    fail(ErrorCode::UnknownColumn, "row has no column '" + std::string(name) + "'");
  }

  const std::string& text(std::string_view name) const { return as<std::string>(name); }
  std::int64_t i64(std::string_view name) const { return as<std::int64_t>(name); }
  double f64(std::string_view name) const { return as<double>(name); }
  const Bytes& bytes(std::string_view name) const { return as<Bytes>(name); }
  const I64List& i64_list(std::string_view name) const { return as<I64List>(name); }
  const F64List& f64_list(std::string_view name) const { return as<F64List>(name); }

  const std::vector<std::pair<std::string, ColumnValue>>& cells() const { return cells_; }
  std::size_t size() const { return cells_.size(); }

  friend bool operator==(const Row&, const Row&) = default;

 private:
  template <typename T>
  const T& as(std::string_view name) const {
    const auto& v = get(name);
    const auto* p = std::get_if<T>(&v);
    if (!p) {
      fail(ErrorCode::SchemaViolation, "column '" + std::string(name) + "' has type " +
                                           std::string(to_string(type_of(v))));
    }
    return *p;
  }

  std::vector<std::pair<std::string, ColumnValue>> cells_;
};

// ----------------------------------------------------------------------
// Value encoding

namespace detail {

inline void put_plain(ByteWriter& w, const ColumnValue& v) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::string>) {
          w.u32(static_cast<std::uint32_t>(x.size()));
          w.raw(x);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          w.i64(x);
        } else if constexpr (std::is_same_v<T, double>) {
          w.f64(x);
        } else if constexpr (std::is_same_v<T, Bytes>) {
          w.u32(static_cast<std::uint32_t>(x.size()));
          w.raw(x);
        } else if constexpr (std::is_same_v<T, I64List>) {
          w.u32(static_cast<std::uint32_t>(x.size()));
          for (auto e : x) w.i64(e);
        } else {
          w.u32(static_cast<std::uint32_t>(x.size()));
          for (auto e : x) w.f64(e);
        }
      },
      v);
}

inline std::size_t plain_size(const ColumnValue& v) {
  return std::visit(
      [](const auto& x) -> std::size_t {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, double>) {
          return 8;
        } else if constexpr (std::is_same_v<T, std::string> || std::is_same_v<T, Bytes>) {
          return 4 + x.size();
        } else {
          return 4 + 8 * x.size();
        }
      },
      v);
}

inline ColumnValue get_plain(ByteReader& r, ColumnType type) {
  switch (type) {
    case ColumnType::Text: return r.text(r.u32());
    case ColumnType::I64: return r.i64();
    case ColumnType::F64: return r.f64();
    case ColumnType::Bytes: {
      auto s = r.raw(r.u32());
      return Bytes(s.begin(), s.end());
    }
    case ColumnType::I64List: {
      const auto n = r.u32();
      if (n > r.remaining() / 8) fail(ErrorCode::CorruptColumn, "list count exceeds payload");
      I64List out(n);
      for (auto& e : out) e = r.i64();
      return out;
    }
    case ColumnType::F64List: {
      const auto n = r.u32();
      if (n > r.remaining() / 8) fail(ErrorCode::CorruptColumn, "list count exceeds payload");
      F64List out(n);
      for (auto& e : out) e = r.f64();
      return out;
    }
  }
  fail(ErrorCode::CorruptColumn, "unknown column type");
}

inline std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in pieces.
  constexpr std::size_t kStep = 1u << 30;
  for (std::size_t off = 0; off < data.size(); off += kStep) {
    const auto n = std::min(kStep, data.size() - off);
    crc = ::crc32(crc, data.data() + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

struct EncodedColumn {
  ColumnEncoding encoding;
  Bytes payload;
};

inline constexpr std::size_t kMaxDictEntries = 255;

/// Dict-RLE iff at most 255 distinct values and the result is strictly
/// smaller than plain. Distinctness is bitwise on the plain encoding.
inline EncodedColumn encode_column(std::span<const ColumnValue* const> values) {
  std::size_t plain_total = 0;
  for (const auto* v : values) plain_total += plain_size(*v);

  std::map<Bytes, std::uint32_t> dict;
  std::vector<const ColumnValue*> dict_order;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> runs;
  bool dict_ok = true;
  for (const auto* v : values) {
    ByteWriter key;
    put_plain(key, *v);
    auto [it, inserted] = dict.try_emplace(key.take(), static_cast<std::uint32_t>(dict.size()));
    if (inserted) {
      if (dict.size() > kMaxDictEntries) {
        dict_ok = false;
        break;
      }
      dict_order.push_back(v);
    }
    if (!runs.empty() && runs.back().first == it->second) {
      ++runs.back().second;
    } else {
      runs.emplace_back(it->second, 1);
    }
  }
  if (dict_ok) {
    std::size_t dict_total = 4 + 4 + 8 * runs.size();
    for (const auto* v : dict_order) dict_total += plain_size(*v);
    if (dict_total < plain_total) {
      ByteWriter w;
      w.buffer().reserve(dict_total);
      w.u32(static_cast<std::uint32_t>(dict_order.size()));
      for (const auto* v : dict_order) put_plain(w, *v);
      w.u32(static_cast<std::uint32_t>(runs.size()));
      for (auto [idx, len] : runs) {
        w.u32(idx);
        w.u32(len);
      }
      return {ColumnEncoding::DictRle, w.take()};
    }
  }
  ByteWriter w;
  w.buffer().reserve(plain_total);
  for (const auto* v : values) put_plain(w, *v);
  return {ColumnEncoding::Plain, w.take()};
}

inline std::vector<ColumnValue> decode_column(std::span<const std::uint8_t> payload, ColumnType type,
                                              ColumnEncoding encoding, std::uint64_t rows) {
  ByteReader r(payload, ErrorCode::CorruptColumn);
  std::vector<ColumnValue> out;
  out.reserve(rows);
  if (encoding == ColumnEncoding::Plain) {
    for (std::uint64_t i = 0; i < rows; ++i) out.push_back(get_plain(r, type));
  } else {
    const auto n = r.u32();
    std::vector<ColumnValue> dict;
    dict.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) dict.push_back(get_plain(r, type));
    const auto run_count = r.u32();
    for (std::uint32_t i = 0; i < run_count; ++i) {
      const auto idx = r.u32();
      const auto len = r.u32();
      if (idx >= dict.size()) fail(ErrorCode::CorruptColumn, "dictionary index out of range");
      if (out.size() + len > rows) fail(ErrorCode::CorruptColumn, "runs exceed row count");
      for (std::uint32_t k = 0; k < len; ++k) out.push_back(dict[idx]);
    }
  }
  if (out.size() != rows || !r.done()) fail(ErrorCode::CorruptColumn, "column payload does not match row count");
  return out;
}

}  // namespace detail

// ----------------------------------------------------------------------
// Segment

/// Decoded segment held column-wise. Rows are materialized on demand so a
/// reader can evaluate a filter on a few columns before fetching the rest.
struct SegmentData {
  std::string schema;
  std::vector<ColumnSpec> columns;
  std::vector<ColumnEncoding> encodings;
  std::vector<std::vector<ColumnValue>> values;  // [column][row]
  std::uint64_t row_count = 0;

  std::optional<std::size_t> column_index(std::string_view name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c].name == name) return c;
    }
    return std::nullopt;
  }

  Row row(std::size_t i) const {
    Row r;
    for (std::size_t c = 0; c < columns.size(); ++c) r.set(columns[c].name, values[c][i]);
    return r;
  }

  /// Only the named columns of row i.
  Row project(std::size_t i, std::span<const std::size_t> cols) const {
    Row r;
    for (auto c : cols) r.set(columns[c].name, values[c][i]);
    return r;
  }
};

/// Serializes rows that all carry exactly `columns` (same order and types).
inline Bytes write_segment(std::string_view schema, std::span<const ColumnSpec> columns, std::span<const Row> rows) {
  if (rows.empty()) fail(ErrorCode::SchemaViolation, "a segment needs at least one row");
  for (const auto& row : rows) {
    if (row.size() != columns.size()) fail(ErrorCode::SchemaViolation, "row does not match segment columns");
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& [name, value] = row.cells()[c];
      if (name != columns[c].name || type_of(value) != columns[c].type) {
        fail(ErrorCode::SchemaViolation, "column '" + columns[c].name + "' missing or mistyped");
      }
    }
  }
  ByteWriter w;
  w.raw("DTBL");
  w.u16(kSegmentVersion);
  w.u16(static_cast<std::uint16_t>(schema.size()));
  w.raw(schema);
  w.u16(static_cast<std::uint16_t>(columns.size()));
  w.u64(rows.size());
  std::vector<const ColumnValue*> column_values(rows.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (std::size_t i = 0; i < rows.size(); ++i) column_values[i] = &rows[i].cells()[c].second;
    auto encoded = detail::encode_column(column_values);
    w.u16(static_cast<std::uint16_t>(columns[c].name.size()));
    w.raw(columns[c].name);
    w.u8(static_cast<std::uint8_t>(columns[c].type));
    w.u8(static_cast<std::uint8_t>(encoded.encoding));
    w.u64(encoded.payload.size());
    w.u32(detail::crc32_of(encoded.payload));
    w.raw(encoded.payload);
  }
  return w.take();
}

inline SegmentData read_segment(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::CorruptColumn);
  if (bytes.size() < 4 || r.text(4) != "DTBL") fail(ErrorCode::BadMagic, "not a DTBL segment");
  if (const auto v = r.u16(); v != kSegmentVersion) {
    fail(ErrorCode::UnsupportedVersion, "segment version " + std::to_string(v));
  }
  SegmentData seg;
  seg.schema = r.text(r.u16());
  const auto ncols = r.u16();
  seg.row_count = r.u64();
  for (std::uint16_t c = 0; c < ncols; ++c) {
    ColumnSpec spec;
    spec.name = r.text(r.u16());
    const auto tag = r.u8();
    if (tag > 5) fail(ErrorCode::CorruptColumn, "unknown type tag " + std::to_string(tag));
    spec.type = static_cast<ColumnType>(tag);
    const auto enc = r.u8();
    if (enc > 1) fail(ErrorCode::CorruptColumn, "unknown encoding " + std::to_string(enc));
    const auto len = r.u64();
    const auto crc = r.u32();
    if (len > r.remaining()) fail(ErrorCode::CorruptColumn, "payload length exceeds segment");
    auto payload = r.raw(static_cast<std::size_t>(len));
    if (detail::crc32_of(payload) != crc) {
      fail(ErrorCode::CorruptColumn, "checksum mismatch in column '" + spec.name + "'");
    }
    seg.values.push_back(
        detail::decode_column(payload, spec.type, static_cast<ColumnEncoding>(enc), seg.row_count));
    seg.columns.push_back(std::move(spec));
    seg.encodings.push_back(static_cast<ColumnEncoding>(enc));
  }
  if (!r.done()) fail(ErrorCode::CorruptColumn, "trailing bytes after last column");
  return seg;
}

}  // namespace dtensor::store
