#pragma once

// Synthetic sparse tensors, space/time metrics and report emission.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "dtensor/container.hpp"
#include "dtensor/error.hpp"
#include "dtensor/layouts.hpp"
#include "dtensor/store/object_store.hpp"
#include "dtensor/store/table.hpp"
#include "dtensor/tensor.hpp"

namespace dtensor::bench {

enum class ValueDist { UnitUniform, PositiveCounts };

inline std::string to_string(ValueDist d) { return d == ValueDist::UnitUniform ? "unit_uniform" : "positive_counts"; }

inline ValueDist value_dist_from_string(std::string_view s) {
  if (s == "unit_uniform") return ValueDist::UnitUniform;
  if (s == "positive_counts") return ValueDist::PositiveCounts;
  fail(ErrorCode::ParseError, "unknown value distribution '" + std::string(s) + "'");
}

struct GenSpec {
  Shape shape{1};
  double density = 0.0;
  std::uint64_t seed = 0;
  ValueDist value_dist = ValueDist::PositiveCounts;
};

namespace detail {

/// Uniform integer in [0, n) by rejection; independent of the standard
/// library's distribution implementations so output is portable.
inline std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  for (;;) {
    const auto x = gen();
    if (x < limit) return x % n;
  }
}

/// Uniform double in (0, 1].
inline double unit_open_closed(std::mt19937_64& gen) {
  return static_cast<double>((gen() >> 11) + 1) * 0x1.0p-53;
}

}  // namespace detail

inline std::int64_t target_nnz(const GenSpec& g) {
  if (std::isnan(g.density) || g.density < 0.0) fail(ErrorCode::InvalidDensity, "density must be in (0, 1]");
  if (g.density > 1.0) fail(ErrorCode::DensityTooHigh, "density " + std::to_string(g.density) + " exceeds 1");
  const auto count = g.shape.element_count();
  return std::min<std::int64_t>(std::llround(g.density * static_cast<double>(count)), count);
}

/// Draws exactly target_nnz distinct coordinates by rejection sampling over
/// linear offsets. Above half density the complement is sampled instead.
inline CooTensor gen_sparse(const GenSpec& g) {
  const auto nnz = target_nnz(g);
  const auto count = g.shape.element_count();
  std::mt19937_64 gen(g.seed);

  const bool complement = nnz > count / 2;
  const auto draws = complement ? count - nnz : nnz;
  std::unordered_set<Index> picked;
  picked.reserve(static_cast<std::size_t>(draws) * 2);
  while (static_cast<Index>(picked.size()) < draws) {
    picked.insert(static_cast<Index>(detail::bounded(gen, static_cast<std::uint64_t>(count))));
  }
  std::vector<Index> offsets;
  offsets.reserve(static_cast<std::size_t>(nnz));
  if (complement) {
    for (Index k = 0; k < count; ++k) {
      if (!picked.count(k)) offsets.push_back(k);
    }
  } else {
    offsets.assign(picked.begin(), picked.end());
    std::sort(offsets.begin(), offsets.end());
  }

  const std::size_t rank = g.shape.rank();
  std::vector<Index> indices(offsets.size() * rank);
  std::vector<double> values(offsets.size());
  std::vector<Index> coord(rank);
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    g.shape.unravel(offsets[k], coord);
    std::copy(coord.begin(), coord.end(), indices.begin() + static_cast<std::ptrdiff_t>(k * rank));
    values[k] = g.value_dist == ValueDist::UnitUniform ? detail::unit_open_closed(gen)
                                                       : static_cast<double>(1 + detail::bounded(gen, 100));
  }
  return CooTensor::from_sorted(g.shape, std::move(indices), std::move(values));
}

// ----------------------------------------------------------------------
// Baselines

enum class Baseline { DenseBinary, CooBinary };

inline std::string to_string(Baseline b) { return b == Baseline::DenseBinary ? "dense_binary" : "coo_binary"; }

inline Baseline baseline_from_string(std::string_view s) {
  if (s == "dense_binary") return Baseline::DenseBinary;
  if (s == "coo_binary") return Baseline::CooBinary;
  fail(ErrorCode::ParseError, "unknown baseline '" + std::string(s) + "'");
}

/// Largest element count for which a dense copy is materialized (512 MiB of f64).
inline constexpr Index kDefaultDenseCap = Index{1} << 26;

/// Size of the ".dten" (F64) or ".dcoo" container holding `c`.
inline std::uint64_t baseline_bytes(const CooTensor& c, Baseline kind, Index dense_cap = kDefaultDenseCap) {
  const auto rank = c.rank();
  if (kind == Baseline::DenseBinary) {
    const auto count = c.shape().element_count();
    if (count > dense_cap) {
      fail(ErrorCode::TooLargeForDense, std::to_string(count) + " elements exceed the dense cap of " +
                                            std::to_string(dense_cap));
    }
    return dten_header_size(rank) + static_cast<std::uint64_t>(count) * 8;
  }
  return dcoo_header_size(rank) + static_cast<std::uint64_t>(c.nnz()) * 8 * (rank + 1);
}

// ----------------------------------------------------------------------
// Report

struct Stat {
  double mean = 0;
  std::int64_t min = 0;
  std::int64_t max = 0;

  friend bool operator==(const Stat&, const Stat&) = default;
};

/// Phases of one trial, nanoseconds.
struct TrialPhases {
  std::int64_t t_en = 0, t_ser = 0, t_write = 0;
  std::int64_t t_des = 0, t_de = 0, t_read_tensor = 0;
  std::int64_t t_des_slice = 0, t_de_slice = 0, t_read_slice = 0;

  friend bool operator==(const TrialPhases&, const TrialPhases&) = default;
};

inline constexpr const char* kTimingNames[] = {"t_en",          "t_ser",       "t_des",      "t_de",        "t_write",
                                               "t_read_tensor", "t_read_slice", "t_des_slice", "t_de_slice"};

inline std::int64_t TrialPhases::*timing_field(std::string_view name) {
  if (name == "t_en") return &TrialPhases::t_en;
  if (name == "t_ser") return &TrialPhases::t_ser;
  if (name == "t_des") return &TrialPhases::t_des;
  if (name == "t_de") return &TrialPhases::t_de;
  if (name == "t_write") return &TrialPhases::t_write;
  if (name == "t_read_tensor") return &TrialPhases::t_read_tensor;
  if (name == "t_read_slice") return &TrialPhases::t_read_slice;
  if (name == "t_des_slice") return &TrialPhases::t_des_slice;
  if (name == "t_de_slice") return &TrialPhases::t_de_slice;
  fail(ErrorCode::ParseError, "unknown timing '" + std::string(name) + "'");
}

struct LayoutResult {
  std::string layout;
  Baseline baseline = Baseline::CooBinary;
  std::uint64_t s_encode_bytes = 0;
  std::uint64_t s_baseline_bytes = 0;
  double c_r = 0;
  std::uint64_t rows_total = 0;
  std::uint64_t rows_scanned_full = 0;
  std::uint64_t rows_scanned_slice = 0;
  std::vector<TrialPhases> trials;

  Stat timing(std::string_view name) const {
    const auto field = timing_field(name);
    Stat s;
    if (trials.empty()) return s;
    s.min = std::numeric_limits<std::int64_t>::max();
    s.max = std::numeric_limits<std::int64_t>::min();
    double sum = 0;
    for (const auto& t : trials) {
      const auto v = t.*field;
      sum += static_cast<double>(v);
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
    }
    s.mean = sum / static_cast<double>(trials.size());
    return s;
  }

  friend bool operator==(const LayoutResult&, const LayoutResult&) = default;
};

struct BenchReport {
  std::vector<Index> shape;
  double density = 0;
  std::uint64_t seed = 0;
  ValueDist value_dist = ValueDist::PositiveCounts;
  std::int64_t nnz = 0;
  int trials = 0;
  std::string slice;
  std::string environment;
  std::vector<LayoutResult> results;

  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

struct BenchOptions {
  int trials = 10;
  std::optional<SliceSpec> slice;  // default: first index of the first dimension
  EncodeOptions encode;
  Index dense_cap = kDefaultDenseCap;
  bool keep_tables = false;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline std::int64_t ns_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
}

inline std::string environment_note() {
  std::string note = "single-threaded; steady_clock ns; ";
#if defined(__clang__)
  note += "clang " __clang_version__;
#elif defined(__GNUC__)
  note += "gcc " __VERSION__;
#elif defined(_MSC_VER)
  note += "msvc " + std::to_string(_MSC_VER);
#endif
#ifdef NDEBUG
  note += "; release";
#else
  note += "; debug";
#endif
  return note;
}

struct TimedRead {
  std::int64_t t_des = 0;
  std::int64_t total = 0;
  store::ScanStats stats;
};

/// Times `read(table, stats)` on a freshly opened table. Opening the manifest
/// and fetching segments count as deserialization; the rest is decoding.
template <typename Result, typename Fn>
Result timed_read(const std::shared_ptr<store::ObjectStore>& os, const std::string& prefix, Fn&& read,
                  TimedRead& timing) {
  const auto t0 = Clock::now();
  const store::Table table = store::Table::open(os, prefix);
  const auto t_open = ns_since(t0);
  Result out = read(table, &timing.stats);
  timing.total = ns_since(t0);
  timing.t_des = std::min(timing.total, t_open + timing.stats.elapsed_ns);
  return out;
}

}  // namespace detail

/// Writes, reads and slices the generated tensor `options.trials` times per
/// layout, each trial into a fresh table under `root`. A layout's entry is
/// reported only if every decoded tensor and slice matched the source.
inline BenchReport run_bench(const GenSpec& g, std::span<const Layout> layouts, const std::filesystem::path& root,
                             const BenchOptions& options = {}) {
  if (options.trials < 1) fail(ErrorCode::ParseError, "trials must be >= 1");
  const CooTensor source = gen_sparse(g);
  const SliceSpec slice = options.slice.value_or(SliceSpec::leading(g.shape.rank(), 0, 1));
  const CooTensor slice_expected = slice_coo(source, slice);

  BenchReport report;
  report.shape = g.shape.dims();
  report.density = g.density;
  report.seed = g.seed;
  report.value_dist = g.value_dist;
  report.nnz = static_cast<std::int64_t>(source.nnz());
  report.trials = options.trials;
  report.slice = slice.to_string();
  report.environment = detail::environment_note();

  std::filesystem::create_directories(root);
  auto os = std::make_shared<store::LocalDirStore>(root);

  for (Layout layout : layouts) {
    const bool dense = layout == Layout::Ftsf;
    LayoutResult res;
    res.layout = layout_name(layout);
    res.baseline = dense ? Baseline::DenseBinary : Baseline::CooBinary;
    res.s_baseline_bytes = baseline_bytes(source, res.baseline, options.dense_cap);
    std::optional<DenseTensor> dense_source;
    std::optional<DenseTensor> dense_slice;
    if (dense) {
      dense_source = coo_to_dense(source);
      dense_slice = coo_to_dense(slice_expected);
    }

    for (int trial = 0; trial < options.trials; ++trial) {
      const std::string prefix = res.layout + "-trial" + std::to_string(trial);
      if (store::Table::exists(*os, prefix)) store::Table::open(os, prefix).drop();
      const TensorId id(res.layout + "-bench");
      TrialPhases ph;

      auto t0 = detail::Clock::now();
      EncodedTensor encoded = dense ? encode_dense(layout, *dense_source, id, options.encode)
                                    : encode_sparse(layout, source, id, options.encode);
      ph.t_en = detail::ns_since(t0);

      t0 = detail::Clock::now();
      {
        store::Table table = store::Table::create(os, prefix, schema_name(layout));
        write_encoded(table, std::move(encoded));
      }
      ph.t_ser = detail::ns_since(t0);
      ph.t_write = ph.t_ser + ph.t_en;

      const store::Table written = store::Table::open(os, prefix);
      const auto size = written.size_bytes();
      if (trial == 0) {
        res.s_encode_bytes = size;
        res.rows_total = written.meta(id).rows;
      } else if (size != res.s_encode_bytes) {
        fail(ErrorCode::VerificationFailed, res.layout + ": table size differs between trials");
      }

      detail::TimedRead full;
      detail::TimedRead part;
      bool ok = false;
      if (dense) {
        auto got = detail::timed_read<DenseTensor>(
            os, prefix, [&](const store::Table& t, store::ScanStats* s) { return read_dense(t, id, s); }, full);
        auto got_slice = detail::timed_read<DenseTensor>(
            os, prefix, [&](const store::Table& t, store::ScanStats* s) { return read_slice_dense(t, id, slice, s); },
            part);
        ok = got == *dense_source && got_slice == *dense_slice;
      } else {
        auto got = detail::timed_read<CooTensor>(
            os, prefix, [&](const store::Table& t, store::ScanStats* s) { return read_coo(t, id, s); }, full);
        auto got_slice = detail::timed_read<CooTensor>(
            os, prefix, [&](const store::Table& t, store::ScanStats* s) { return read_slice_coo(t, id, slice, s); },
            part);
        ok = got == source && got_slice == slice_expected;
      }
      if (!ok) fail(ErrorCode::VerificationFailed, res.layout + ": decoded tensor differs from the source");

      ph.t_des = full.t_des;
      ph.t_de = full.total - full.t_des;
      ph.t_read_tensor = ph.t_des + ph.t_de;
      ph.t_des_slice = part.t_des;
      ph.t_de_slice = part.total - part.t_des;
      ph.t_read_slice = ph.t_des_slice + ph.t_de_slice;
      res.rows_scanned_full = full.stats.rows_scanned;
      res.rows_scanned_slice = part.stats.rows_scanned;
      res.trials.push_back(ph);

      if (!options.keep_tables) store::Table::open(os, prefix).drop();
    }
    res.c_r = static_cast<double>(res.s_encode_bytes) / static_cast<double>(res.s_baseline_bytes);
    report.results.push_back(std::move(res));
  }
  return report;
}

// ----------------------------------------------------------------------
// Emission

inline nlohmann::json to_json(const BenchReport& r) {
  using nlohmann::json;
  json results = json::array();
  for (const auto& res : r.results) {
    json timings = json::object();
    for (const char* name : kTimingNames) {
      const auto s = res.timing(name);
      timings[name] = {{"mean", s.mean}, {"min", s.min}, {"max", s.max}};
    }
    json trials = json::array();
    for (const auto& t : res.trials) {
      json tj = json::object();
      for (const char* name : kTimingNames) tj[name] = t.*timing_field(name);
      trials.push_back(std::move(tj));
    }
    results.push_back({{"layout", res.layout},
                       {"baseline", to_string(res.baseline)},
                       {"s_encode_bytes", res.s_encode_bytes},
                       {"s_baseline_bytes", res.s_baseline_bytes},
                       {"c_r", res.c_r},
                       {"timings", std::move(timings)},
                       {"rows_scanned", {{"total", res.rows_total}, {"full", res.rows_scanned_full},
                                         {"slice", res.rows_scanned_slice}}},
                       {"trials", std::move(trials)}});
  }
  return {{"spec",
           {{"shape", r.shape},
            {"density", r.density},
            {"seed", r.seed},
            {"value_dist", to_string(r.value_dist)},
            {"nnz", r.nnz},
            {"trials", r.trials},
            {"slice", r.slice}}},
          {"environment", r.environment},
          {"results", std::move(results)}};
}

inline BenchReport from_json(const nlohmann::json& j) {
  try {
    BenchReport r;
    const auto& spec = j.at("spec");
    r.shape = spec.at("shape").get<std::vector<Index>>();
    r.density = spec.at("density").get<double>();
    r.seed = spec.at("seed").get<std::uint64_t>();
    r.value_dist = value_dist_from_string(spec.at("value_dist").get<std::string>());
    r.nnz = spec.at("nnz").get<std::int64_t>();
    r.trials = spec.at("trials").get<int>();
    r.slice = spec.at("slice").get<std::string>();
    r.environment = j.at("environment").get<std::string>();
    for (const auto& rj : j.at("results")) {
      LayoutResult res;
      res.layout = rj.at("layout").get<std::string>();
      res.baseline = baseline_from_string(rj.at("baseline").get<std::string>());
      res.s_encode_bytes = rj.at("s_encode_bytes").get<std::uint64_t>();
      res.s_baseline_bytes = rj.at("s_baseline_bytes").get<std::uint64_t>();
      res.c_r = rj.at("c_r").get<double>();
      res.rows_total = rj.at("rows_scanned").at("total").get<std::uint64_t>();
      res.rows_scanned_full = rj.at("rows_scanned").at("full").get<std::uint64_t>();
      res.rows_scanned_slice = rj.at("rows_scanned").at("slice").get<std::uint64_t>();
      for (const auto& tj : rj.at("trials")) {
        TrialPhases t;
        for (const char* name : kTimingNames) t.*timing_field(name) = tj.at(name).get<std::int64_t>();
        res.trials.push_back(t);
      }
      r.results.push_back(std::move(res));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("malformed bench report: ") + e.what());
  }
}

enum class ReportFormat { Json, Csv };

inline ReportFormat report_format_from_string(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  fail(ErrorCode::ParseError, "unknown report format '" + std::string(s) + "'");
}

inline std::string csv_header() {
  std::string h = "layout,baseline,s_encode_bytes,s_baseline_bytes,c_r";
  for (const char* name : kTimingNames) {
    for (const char* stat : {"mean", "min", "max"}) h += std::string(",") + name + "_" + stat;
  }
  return h + ",rows_total,rows_scanned_full,rows_scanned_slice";
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string emit_report(const BenchReport& r, ReportFormat format) {
  if (format == ReportFormat::Json) return to_json(r).dump(2) + "\n";
  std::string out = csv_header() + "\n";
  for (const auto& res : r.results) {
    out += res.layout + "," + to_string(res.baseline) + "," + std::to_string(res.s_encode_bytes) + "," +
           std::to_string(res.s_baseline_bytes) + "," + format_double(res.c_r);
    for (const char* name : kTimingNames) {
      const auto s = res.timing(name);
      out += "," + format_double(s.mean) + "," + std::to_string(s.min) + "," + std::to_string(s.max);
    }
    out += "," + std::to_string(res.rows_total) + "," + std::to_string(res.rows_scanned_full) + "," +
           std::to_string(res.rows_scanned_slice) + "\n";
  }
  return out;
}

inline BenchReport parse_report_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("bench report is not JSON: ") + e.what());
  }
  return from_json(j);
}

}  // namespace dtensor::bench
