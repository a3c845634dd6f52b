#pragma once

// Implementation of the `dt` command line. Kept in the library so tests can
// drive it without spawning a process.

#include <cctype>
#include <charconv>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "dtensor/bench.hpp"
#include "dtensor/container.hpp"
#include "dtensor/csf.hpp"
#include "dtensor/error.hpp"
#include "dtensor/layouts.hpp"
#include "dtensor/store/object_store.hpp"
#include "dtensor/store/table.hpp"
#include "dtensor/tensor.hpp"

namespace dtensor::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::optional<Index> parse_index(std::string_view s) {
  s = trim(s);
  Index v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v < 0) return std::nullopt;
  return v;
}

/// Splits on commas, remembering where each token starts.
inline std::vector<std::pair<std::string_view, std::size_t>> split(std::string_view text) {
  std::vector<std::pair<std::string_view, std::size_t>> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    out.emplace_back(text.substr(start, end - start), start);
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

}  // namespace detail

/// Parses "0:100,:,5" into ranges; "k" means [k, k+1).
inline SliceSpec parse_slice_spec(std::string_view text) {
  std::vector<std::optional<IndexRange>> ranges;
  for (const auto& [raw, pos] : detail::split(text)) {
    const auto bad = [&, raw = raw, pos = pos](std::string_view why) {
      fail(ErrorCode::ParseError, "slice token '" + std::string(raw) + "' at position " + std::to_string(pos) +
                                      ": " + std::string(why));
    };
    const auto tok = detail::trim(raw);
    if (tok.empty()) bad("empty token");
    if (tok == ":") {
      ranges.emplace_back(std::nullopt);
      continue;
    }
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos) {
      const auto k = detail::parse_index(tok);
      if (!k) bad("expected ':', 'a:b' or an index");
      ranges.emplace_back(IndexRange{*k, *k + 1});
      continue;
    }
    const auto a = detail::parse_index(tok.substr(0, colon));
    const auto b = detail::parse_index(tok.substr(colon + 1));
    if (!a || !b) bad("expected 'a:b' with non-negative integers");
    if (*a >= *b) bad("empty range");
    ranges.emplace_back(IndexRange{*a, *b});
  }
  return SliceSpec(std::move(ranges));
}

/// Parses "a,b,c" into positive dimensions.
inline std::vector<Index> parse_dims(std::string_view text) {
  std::vector<Index> dims;
  for (const auto& [raw, pos] : detail::split(text)) {
    const auto v = detail::parse_index(raw);
    if (!v || *v < 1) {
      fail(ErrorCode::ParseError, "dimension '" + std::string(raw) + "' at position " + std::to_string(pos) +
                                      " is not a positive integer");
    }
    dims.push_back(*v);
  }
  return dims;
}

/// "{layout}-{N}d-{12 hex}".
inline TensorId generate_id(Layout layout, std::size_t rank) { return csf::generate_id(layout_name(layout), rank); }

namespace detail {

enum class FileKind { Dten, Dcoo };

inline FileKind file_kind(const std::filesystem::path& p, bool required) {
  const auto ext = p.extension().string();
  if (ext == ".dten") return FileKind::Dten;
  if (ext == ".dcoo") return FileKind::Dcoo;
  if (required) fail(ErrorCode::ParseError, "expected a .dten or .dcoo path, got '" + p.string() + "'");
  return FileKind::Dcoo;
}

inline store::Table open_or_create(const std::shared_ptr<store::ObjectStore>& os, Layout layout) {
  if (store::Table::exists(*os, "")) {
    auto table = store::Table::open(os, "");
    if (table.schema().name != schema_name(layout)) {
      fail(ErrorCode::ParseError, "table holds schema " + table.schema().name + ", not " + schema_name(layout));
    }
    return table;
  }
  return store::Table::create(os, "", schema_name(layout));
}

inline store::Table open_existing(const std::filesystem::path& dir) {
  auto os = std::make_shared<store::LocalDirStore>(dir);
  if (!store::Table::exists(*os, "")) fail(ErrorCode::NotFound, "no table at " + dir.string());
  return store::Table::open(os, "");
}

/// Output container: the --out extension when it names one, else the
/// layout family.
inline FileKind output_kind(const std::filesystem::path& out, Layout layout) {
  const auto ext = out.extension().string();
  if (ext == ".dten") return FileKind::Dten;
  if (ext == ".dcoo") return FileKind::Dcoo;
  return layout == Layout::Ftsf ? FileKind::Dten : FileKind::Dcoo;
}

struct WriteArgs {
  std::string input, table, layout, id;
  std::optional<std::int64_t> chunk_dim;
  std::string block_shape;
};

struct ReadArgs {
  std::string table, id, spec, out;
};

struct BenchArgs {
  std::string shape, layouts, slice, report, format = "json";
  double density = 0;
  std::uint64_t seed = 0;
  int trials = 10;
};

inline int cmd_write(const WriteArgs& a, std::ostream& out) {
  const std::filesystem::path input(a.input);
  const auto kind = file_kind(input, true);
  const auto bytes = read_file(input);
  std::optional<DenseTensor> dense;
  CooTensor coo(Shape{1});
  if (kind == FileKind::Dten) {
    dense = decode_dten(bytes);
    coo = dense_to_coo(*dense);
  } else {
    coo = decode_dcoo(bytes);
  }

  Layout layout;
  if (a.layout == "auto") {
    layout = classify(coo) == SparsityClass::General ? Layout::Ftsf : Layout::Bsgs;
  } else {
    layout = parse_layout(a.layout);
  }
  EncodeOptions opts;
  opts.chunk_dim = a.chunk_dim;
  if (!a.block_shape.empty()) opts.block_shape = parse_dims(a.block_shape);

  const TensorId id = a.id.empty() ? generate_id(layout, coo.rank()) : TensorId(a.id);
  auto os = std::make_shared<store::LocalDirStore>(a.table);
  auto table = open_or_create(os, layout);
  if (table.find(id)) fail(ErrorCode::AlreadyExists, "id '" + id.str() + "' already in table");

  if (layout == Layout::Ftsf && !dense) {
    if (coo.shape().element_count() > bench::kDefaultDenseCap) {
      fail(ErrorCode::TooLargeForDense, "tensor too large to store densely");
    }
    dense = coo_to_dense(coo);
  }
  write_encoded(table, dense ? encode_dense(layout, *dense, id, opts) : encode_sparse(layout, coo, id, opts));
  out << id.str() << "\n";
  return kExitOk;
}

inline void write_output(const std::filesystem::path& path, FileKind kind, const DenseTensor* dense,
                         const CooTensor* coo) {
  if (kind == FileKind::Dten) {
    write_file(path, encode_dten(dense ? *dense : coo_to_dense(*coo)));
  } else {
    write_file(path, encode_dcoo(coo ? *coo : dense_to_coo(*dense)));
  }
}

inline int cmd_read(const ReadArgs& a, bool slice, std::ostream& out) {
  const auto table = open_existing(a.table);
  const TensorId id(a.id);
  const Layout layout = layout_of(table, id);
  const auto kind = output_kind(a.out, layout);
  if (kind == FileKind::Dten || layout == Layout::Ftsf) {
    const DenseTensor t = slice ? read_slice_dense(table, id, parse_slice_spec(a.spec)) : read_dense(table, id);
    write_output(a.out, kind, &t, nullptr);
  } else {
    const CooTensor c = slice ? read_slice_coo(table, id, parse_slice_spec(a.spec)) : read_coo(table, id);
    write_output(a.out, kind, nullptr, &c);
  }
  out << a.out << "\n";
  return kExitOk;
}

inline int cmd_inspect(const std::string& dir, std::ostream& out) {
  const auto table = open_existing(dir);
  const auto& m = table.manifest();
  out << "schema " << m.schema << "\n";
  out << "segments " << m.segments.size() << "\n";
  out << "size_bytes " << table.size_bytes() << "\n";
  for (const auto& [id, meta] : m.ids) {
    std::uint64_t bytes = 0;
    for (const auto& key : meta.segments) {
      for (const auto& s : m.segments) {
        if (s.key == key) bytes += s.size;
      }
    }
    out << "id " << id << " layout " << meta.layout << " dtype " << to_string(meta.dtype) << " shape "
        << Shape(meta.dense_shape).to_string() << " rows " << meta.rows << " segments " << meta.segments.size()
        << " bytes " << bytes << "\n";
  }
  return kExitOk;
}

inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  bench::GenSpec g;
  g.shape = Shape(parse_dims(a.shape));
  g.density = a.density;
  g.seed = a.seed;
  std::vector<Layout> layouts;
  for (const auto& [tok, pos] : split(a.layouts)) layouts.push_back(parse_layout(trim(tok)));
  bench::BenchOptions opts;
  opts.trials = a.trials;
  if (!a.slice.empty()) opts.slice = parse_slice_spec(a.slice);
  const auto format = bench::report_format_from_string(a.format);

  std::random_device rd;
  const auto root = std::filesystem::temp_directory_path() / ("dt-bench-" + std::to_string(rd()));
  bench::BenchReport report;
  try {
    report = bench::run_bench(g, layouts, root, opts);
  } catch (...) {
    std::filesystem::remove_all(root);
    throw;
  }
  std::filesystem::remove_all(root);
  const auto text = bench::emit_report(report, format);
  write_file(a.report, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  out << a.report << "\n";
  return kExitOk;
}

}  // namespace detail

/// Runs one `dt` invocation. `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Tensor storage over columnar segment tables", "dt"};
  app.require_subcommand(1);

  detail::WriteArgs w;
  auto* write = app.add_subcommand("write", "Encode a .dten/.dcoo file into a table");
  write->add_option("--input", w.input, "Input .dten or .dcoo file")->required();
  write->add_option("--table", w.table, "Table directory")->required();
  write->add_option("--layout", w.layout, "ftsf|coo|csr|csc|csf|bsgs|auto")
      ->required()
      ->check(CLI::IsMember({"ftsf", "coo", "csr", "csc", "csf", "bsgs", "auto"}));
  write->add_option("--id", w.id, "Tensor id (generated when absent)");
  write->add_option("--chunk-dim", w.chunk_dim, "FTSF merged trailing dimensions");
  write->add_option("--block-shape", w.block_shape, "BSGS block shape, e.g. 2,1");

  detail::ReadArgs r;
  auto* read = app.add_subcommand("read", "Decode a tensor to a file");
  read->add_option("--table", r.table, "Table directory")->required();
  read->add_option("--id", r.id, "Tensor id")->required();
  read->add_option("--out", r.out, "Output file")->required();

  detail::ReadArgs s;
  auto* slice = app.add_subcommand("slice", "Decode a slice to a file");
  slice->add_option("--table", s.table, "Table directory")->required();
  slice->add_option("--id", s.id, "Tensor id")->required();
  slice->add_option("--spec", s.spec, "Slice, e.g. \"0:10,:,3\"")->required();
  slice->add_option("--out", s.out, "Output file")->required();

  detail::BenchArgs b;
  auto* benchc = app.add_subcommand("bench", "Benchmark layouts on a synthetic tensor");
  benchc->add_option("--shape", b.shape, "Dimensions, e.g. 183,24,114,171")->required();
  benchc->add_option("--density", b.density, "Nonzero fraction")->required();
  benchc->add_option("--seed", b.seed, "Generator seed")->required();
  benchc->add_option("--layouts", b.layouts, "Comma-separated layouts")->required();
  benchc->add_option("--trials", b.trials, "Trials per layout")->required()->check(CLI::PositiveNumber);
  benchc->add_option("--slice", b.slice, "Slice to time (default first index of dimension 0)");
  benchc->add_option("--report", b.report, "Report path")->required();
  benchc->add_option("--format", b.format, "json|csv")->required()->check(CLI::IsMember({"json", "csv"}));

  std::string inspect_dir;
  auto* inspect = app.add_subcommand("inspect", "Describe a table");
  inspect->add_option("--table", inspect_dir, "Table directory")->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*write) return detail::cmd_write(w, out);
    if (*read) return detail::cmd_read(r, false, out);
    if (*slice) return detail::cmd_read(s, true, out);
    if (*benchc) return detail::cmd_bench(b, out);
    if (*inspect) return detail::cmd_inspect(inspect_dir, out);
  } catch (const Error& e) {
    err << "dt: " << e.what() << "\n";
    return e.code() == ErrorCode::ParseError ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "dt: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace dtensor::cli
