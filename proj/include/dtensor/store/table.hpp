#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dtensor/error.hpp"
#include "dtensor/store/object_store.hpp"
#include "dtensor/store/schemas.hpp"
#include "dtensor/store/segment.hpp"
#include "dtensor/tensor.hpp"

namespace dtensor::store {

inline constexpr int kManifestVersion = 1;
inline constexpr std::string_view kManifestName = "manifest.json";

/// Per-tensor manifest record.
struct TensorMeta {
  std::string layout;
  std::vector<Index> dense_shape;
  ElementType dtype = ElementType::F64;
  /// Layout parameters readers need before touching rows
  /// (e.g. "chunk_dim_count", "block_shape").
  std::map<std::string, std::vector<std::int64_t>> attrs;
  std::uint64_t rows = 0;
  std::vector<std::string> segments;

  friend bool operator==(const TensorMeta&, const TensorMeta&) = default;
};

struct SegmentInfo {
  std::string key;
  std::string kind;
  std::uint64_t rows = 0;
  std::uint64_t size = 0;

  friend bool operator==(const SegmentInfo&, const SegmentInfo&) = default;
};

struct Manifest {
  std::string schema;
  int format_version = kManifestVersion;
  std::vector<SegmentInfo> segments;
  std::map<std::string, TensorMeta> ids;

  friend bool operator==(const Manifest&, const Manifest&) = default;

  nlohmann::json to_json() const {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : segments) {
      segs.push_back({{"key", s.key}, {"kind", s.kind}, {"rows", s.rows}, {"size", s.size}});
    }
    nlohmann::json index = nlohmann::json::object();
    for (const auto& [id, m] : ids) {
      index[id] = {{"layout", m.layout},
                   {"dense_shape", m.dense_shape},
                   {"dtype", to_string(m.dtype)},
                   {"attrs", m.attrs},
                   {"rows", m.rows},
                   {"segments", m.segments}};
    }
    return {{"schema", schema}, {"format_version", format_version}, {"segments", segs}, {"ids", index}};
  }

  static Manifest from_json(const nlohmann::json& j) {
    try {
      Manifest m;
      m.schema = j.at("schema").get<std::string>();
      m.format_version = j.at("format_version").get<int>();
      if (m.format_version != kManifestVersion) {
        fail(ErrorCode::UnsupportedVersion, "manifest version " + std::to_string(m.format_version));
      }
      for (const auto& s : j.at("segments")) {
        m.segments.push_back({s.at("key").get<std::string>(), s.at("kind").get<std::string>(),
                              s.at("rows").get<std::uint64_t>(), s.at("size").get<std::uint64_t>()});
      }
      for (const auto& [id, e] : j.at("ids").items()) {
        TensorMeta t;
        t.layout = e.at("layout").get<std::string>();
        t.dense_shape = e.at("dense_shape").get<std::vector<Index>>();
        t.dtype = element_type_from_string(e.at("dtype").get<std::string>());
        t.attrs = e.at("attrs").get<std::map<std::string, std::vector<std::int64_t>>>();
        t.rows = e.at("rows").get<std::uint64_t>();
        t.segments = e.at("segments").get<std::vector<std::string>>();
        m.ids.emplace(id, std::move(t));
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::CorruptColumn, std::string("malformed manifest: ") + e.what());
    }
  }
};

/// Counters for one read operation.
struct ScanStats {
  std::uint64_t rows_scanned = 0;     // rows materialized (or evaluated in full by scan_filtered)
  std::uint64_t rows_probed = 0;      // rows whose filter columns were evaluated by scan_pushdown
  std::uint64_t bytes_read = 0;
  std::uint64_t segments_opened = 0;
  std::int64_t elapsed_ns = 0;        // wall time spent fetching and decoding segments

  ScanStats& operator+=(const ScanStats& o) {
    rows_scanned += o.rows_scanned;
    rows_probed += o.rows_probed;
    bytes_read += o.bytes_read;
    segments_opened += o.segments_opened;
    elapsed_ns += o.elapsed_ns;
    return *this;
  }
};

struct ScanResult {
  std::vector<Row> rows;
  ScanStats stats;
};

/// Row condition over a declared set of columns. Only the declared columns
/// are visible to `test` under scan_pushdown.
struct Predicate {
  std::vector<std::string> columns;
  std::function<bool(const Row&)> test;

  static Predicate always(bool value) {
    return {{}, [value](const Row&) { return value; }};
  }
};

/// A named set of immutable segments plus a JSON manifest, rooted at a key
/// prefix of an ObjectStore. Single writer, any number of readers; a Table
/// object reads the manifest snapshot it was opened with.
class Table {
 public:
  static Table create(std::shared_ptr<ObjectStore> os, std::string prefix, std::string_view schema_name) {
    const Schema& schema = schemas::by_name(schema_name);
    Table t(std::move(os), std::move(prefix));
    if (!t.store_->list(t.prefix_key()).empty()) {
      fail(ErrorCode::AlreadyExists, "table prefix '" + t.prefix_ + "' is not empty");
    }
    t.schema_ = &schema;
    t.manifest_.schema = schema.name;
    t.write_manifest();
    return t;
  }

  static Table open(std::shared_ptr<ObjectStore> os, std::string prefix) {
    Table t(std::move(os), std::move(prefix));
    const auto bytes = t.store_->get(t.key(kManifestName));
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::CorruptColumn, std::string("manifest is not JSON: ") + e.what());
    }
    t.manifest_ = Manifest::from_json(j);
    t.schema_ = &schemas::by_name(t.manifest_.schema);
    return t;
  }

  static bool exists(const ObjectStore& os, const std::string& prefix) {
    return os.exists(prefix.empty() ? std::string(kManifestName) : prefix + "/" + std::string(kManifestName));
  }

  const Schema& schema() const { return *schema_; }
  const Manifest& manifest() const { return manifest_; }
  const std::string& prefix() const { return prefix_; }
  ObjectStore& object_store() const { return *store_; }

  const TensorMeta* find(const TensorId& id) const {
    auto it = manifest_.ids.find(id.str());
    return it == manifest_.ids.end() ? nullptr : &it->second;
  }

  const TensorMeta& meta(const TensorId& id) const {
    const auto* m = find(id);
    if (!m) fail(ErrorCode::UnknownId, "unknown id '" + id.str() + "'");
    return *m;
  }

  /// Appends rows as new segment(s), one per row kind present, and extends
  /// the id index. Returns the new segment keys.
  std::vector<std::string> append_rows(std::span<const Row> rows) { return append(rows, nullptr, nullptr); }

  /// Appends a tensor's rows and registers its metadata in one manifest
  /// update. Zero rows is allowed: the tensor is then known only through
  /// its manifest record.
  std::vector<std::string> append_tensor(const TensorId& id, TensorMeta meta, std::span<const Row> rows) {
    return append(rows, &id, &meta);
  }

  ScanResult scan(const TensorId& id, std::optional<std::string_view> kind = std::nullopt) const {
    return run_scan(id, kind, nullptr, Mode::Full);
  }

  /// Evaluates `pred` against every full row of `id`; rows_scanned counts
  /// every evaluated row.
  ScanResult scan_filtered(const TensorId& id, const Predicate& pred,
                           std::optional<std::string_view> kind = std::nullopt) const {
    validate(pred);
    return run_scan(id, kind, &pred, Mode::Filtered);
  }

  /// Late materialization: `pred` sees only its declared columns; rows are
  /// materialized (and counted in rows_scanned) only when it passes.
  ScanResult scan_pushdown(const TensorId& id, const Predicate& pred,
                           std::optional<std::string_view> kind = std::nullopt) const {
    validate(pred);
    return run_scan(id, kind, &pred, Mode::Pushdown);
  }

  /// Segment bytes plus manifest bytes.
  std::uint64_t size_bytes() const {
    std::uint64_t total = store_->size(key(kManifestName));
    for (const auto& s : manifest_.segments) total += s.size;
    return total;
  }

  /// Removes every object of this table.
  void drop() {
    for (const auto& k : store_->list(prefix_key())) store_->erase(k);
  }

 private:
  enum class Mode { Full, Filtered, Pushdown };

  Table(std::shared_ptr<ObjectStore> os, std::string prefix) : store_(std::move(os)), prefix_(std::move(prefix)) {
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  std::string prefix_key() const { return prefix_.empty() ? std::string() : prefix_ + "/"; }
  std::string key(std::string_view name) const { return prefix_key() + std::string(name); }

  void write_manifest() {
    const auto text = manifest_.to_json().dump(2) + "\n";
    store_->put(key(kManifestName), std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }

  void validate(const Predicate& pred) const {
    for (const auto& c : pred.columns) {
      if (!schema_->has_column(c)) fail(ErrorCode::UnknownColumn, "schema " + schema_->name + " has no column '" + c + "'");
    }
  }

  std::vector<std::string> append(std::span<const Row> rows, const TensorId* id, TensorMeta* meta) {
    // Group by kind, preserving row order within each kind.
    std::vector<std::pair<const RowKind*, std::vector<Row>>> groups;
    for (const auto& row : rows) {
      const RowKind* kind = schema_->match(row);
      if (!kind) fail(ErrorCode::SchemaViolation, "row does not conform to any row kind of " + schema_->name);
      auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == kind; });
      if (it == groups.end()) {
        groups.emplace_back(kind, std::vector<Row>{});
        it = std::prev(groups.end());
      }
      it->second.push_back(kind->normalize(row));
    }

    Manifest next = manifest_;
    std::vector<std::string> keys;
    for (const auto& [kind, group] : groups) {
      char name[32];
      std::snprintf(name, sizeof name, "seg-%06zu.dtbl", next.segments.size() + 1);
      const std::string seg_key = key(name);
      const auto bytes = write_segment(schema_->name, kind->columns, group);
      store_->put(seg_key, bytes);
      next.segments.push_back({seg_key, kind->name, group.size(), bytes.size()});
      keys.push_back(seg_key);

      std::map<std::string, std::uint64_t> per_id;
      for (const auto& row : group) ++per_id[row.text("id")];
      for (const auto& [row_id, count] : per_id) {
        auto& entry = next.ids[row_id];
        entry.rows += count;
        entry.segments.push_back(seg_key);
      }
    }
    if (id && meta) {
      auto& entry = next.ids[id->str()];
      meta->rows = entry.rows;
      meta->segments = entry.segments;
      entry = std::move(*meta);
    }
    manifest_ = std::move(next);
    write_manifest();
    return keys;
  }

  ScanResult run_scan(const TensorId& id, std::optional<std::string_view> kind, const Predicate* pred,
                      Mode mode) const {
    const auto start = std::chrono::steady_clock::now();
    ScanResult result;
    const auto* m = find(id);
    if (!m) return result;
    for (const auto& seg_key : m->segments) {
      const auto info = std::find_if(manifest_.segments.begin(), manifest_.segments.end(),
                                     [&](const SegmentInfo& s) { return s.key == seg_key; });
      if (kind && info != manifest_.segments.end() && info->kind != *kind) continue;
      const auto bytes = store_->get(seg_key);
      ++result.stats.segments_opened;
      result.stats.bytes_read += bytes.size();
      const SegmentData seg = read_segment(bytes);
      const auto id_col = seg.column_index("id");
      if (!id_col) fail(ErrorCode::SchemaViolation, "segment " + seg_key + " has no id column");

      std::vector<std::size_t> pred_cols;
      if (pred && mode == Mode::Pushdown) {
        for (const auto& c : pred->columns) {
          auto ci = seg.column_index(c);
          if (!ci) fail(ErrorCode::UnknownColumn, "segment " + seg_key + " has no column '" + c + "'");
          pred_cols.push_back(*ci);
        }
      }
      for (std::size_t i = 0; i < seg.row_count; ++i) {
        if (std::get<std::string>(seg.values[*id_col][i]) != id.str()) continue;
        switch (mode) {
          case Mode::Full:
            ++result.stats.rows_scanned;
            result.rows.push_back(seg.row(i));
            break;
          case Mode::Filtered: {
            ++result.stats.rows_scanned;
            Row row = seg.row(i);
            if (pred->test(row)) result.rows.push_back(std::move(row));
            break;
          }
          case Mode::Pushdown:
            ++result.stats.rows_probed;
            if (pred->test(seg.project(i, pred_cols))) {
              ++result.stats.rows_scanned;
              result.rows.push_back(seg.row(i));
            }
            break;
        }
      }
    }
    result.stats.elapsed_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

  std::shared_ptr<ObjectStore> store_;
  std::string prefix_;
  const Schema* schema_ = nullptr;
  Manifest manifest_;
};

inline Table create_table(std::shared_ptr<ObjectStore> os, std::string prefix, std::string_view schema) {
  return Table::create(std::move(os), std::move(prefix), schema);
}

inline Table open_table(std::shared_ptr<ObjectStore> os, std::string prefix) {
  return Table::open(std::move(os), std::move(prefix));
}

}  // namespace dtensor::store
