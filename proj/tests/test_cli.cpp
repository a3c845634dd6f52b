#include <gtest/gtest.h>

#include <cstdio>
#include <regex>
#include <sstream>

#include "dtensor/bench.hpp"
#include "dtensor/cli.hpp"
#include "dtensor/container.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dtensor;
using testutil::code_of;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome dt(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::string read_text(const std::filesystem::path& p) {
  const auto b = read_file(p);
  return {b.begin(), b.end()};
}

}  // namespace

TEST(SliceSpecText, Examples) {
  const auto s = cli::parse_slice_spec("0:100,:,:,:");
  ASSERT_EQ(s.rank(), 4u);
  EXPECT_EQ(s.to_string(), "0:100,:,:,:");
  EXPECT_EQ(cli::parse_slice_spec(":,:,:").to_string(), ":,:,:");
  EXPECT_EQ(cli::parse_slice_spec("5,:,:").to_string(), "5:6,:,:");
  EXPECT_EQ(cli::parse_slice_spec(" 1:3 , 2 ").to_string(), "1:3,2:3");
}

TEST(SliceSpecText, Errors) {
  for (const char* bad : {"", "a", "1:", "3:3", "4:2", "1,,2", "-1", "1:2:3", ":,x:1"}) {
    EXPECT_EQ(code_of([&] { cli::parse_slice_spec(bad); }), ErrorCode::ParseError) << bad;
  }
  try {
    cli::parse_slice_spec("0:2,x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'x'"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("position 4"), std::string::npos) << e.what();
  }
}

TEST(Cli, AutoPicksBsgsForSparseInput) {
  testutil::TempDir dir("cli-auto");
  bench::GenSpec g;
  g.shape = Shape{30, 24, 20, 30};
  g.density = 0.000385;
  g.seed = 3;
  const auto c = bench::gen_sparse(g);
  write_file(dir.path / "in.dcoo", encode_dcoo(c));
  const auto r = dt({"write", "--input", (dir.path / "in.dcoo").string(), "--table", (dir.path / "t").string(),
                     "--layout", "auto"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto id = first_line(r.out);
  EXPECT_TRUE(std::regex_match(id, std::regex("bsgs-4d-[0-9a-f]{12}"))) << id;

  const auto rd = dt({"read", "--table", (dir.path / "t").string(), "--id", id, "--out", (dir.path / "o.dcoo").string()});
  ASSERT_EQ(rd.code, 0) << rd.err;
  EXPECT_EQ(decode_dcoo(read_file(dir.path / "o.dcoo")), c);
}

TEST(Cli, AutoPicksFtsfForDenseInput) {
  testutil::TempDir dir("cli-dense");
  std::mt19937_64 gen(1);
  const auto t = cast_dense(oracle::to_dense(oracle::random_ref(gen, {6, 3, 4, 4}, 0.9)), ElementType::U8);
  write_file(dir.path / "in.dten", encode_dten(t));
  const auto r = dt({"write", "--input", (dir.path / "in.dten").string(), "--table", (dir.path / "t").string(),
                     "--layout", "auto", "--id", "img"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "img\n");
  ASSERT_EQ(dt({"read", "--table", (dir.path / "t").string(), "--id", "img", "--out", (dir.path / "o.dten").string()}).code, 0);
  EXPECT_EQ(decode_dten(read_file(dir.path / "o.dten")), t);

  const auto s = dt({"slice", "--table", (dir.path / "t").string(), "--id", "img", "--spec", "1:3,:,:,:", "--out",
                     (dir.path / "s.dten").string()});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(decode_dten(read_file(dir.path / "s.dten")), slice_dense(t, SliceSpec::leading(4, 1, 3)));
}

TEST(Cli, EveryLayoutRoundtripsAndSlices) {
  testutil::TempDir dir("cli-all");
  std::mt19937_64 gen(2);
  const auto ref = oracle::random_ref(gen, {5, 4, 6}, 0.2);
  const auto c = oracle::to_coo(ref);
  write_file(dir.path / "in.dcoo", encode_dcoo(c));
  for (const char* layout : {"ftsf", "coo", "csr", "csc", "csf", "bsgs"}) {
    const auto table = (dir.path / layout).string();
    std::vector<std::string> args{"write", "--input", (dir.path / "in.dcoo").string(), "--table", table, "--layout",
                                  layout, "--id", "x"};
    if (std::string(layout) == "bsgs") args.insert(args.end(), {"--block-shape", "2,3"});
    const auto w = dt(args);
    ASSERT_EQ(w.code, 0) << layout << ": " << w.err;
    const auto out = (dir.path / (std::string(layout) + ".dcoo")).string();
    ASSERT_EQ(dt({"read", "--table", table, "--id", "x", "--out", out}).code, 0);
    EXPECT_EQ(decode_dcoo(read_file(out)), c) << layout;
    const auto sl = (dir.path / (std::string(layout) + "-s.dcoo")).string();
    ASSERT_EQ(dt({"slice", "--table", table, "--id", "x", "--spec", "1:3,2,:", "--out", sl}).code, 0);
    EXPECT_EQ(decode_dcoo(read_file(sl)), oracle::to_coo(oracle::slice(ref, {{1, 3}, {2, 3}, {0, 6}}))) << layout;
  }
}

TEST(Cli, InspectListsIds) {
  testutil::TempDir dir("cli-inspect");
  write_file(dir.path / "a.dcoo", encode_dcoo(testutil::figure5()));
  const auto table = (dir.path / "t").string();
  ASSERT_EQ(dt({"write", "--input", (dir.path / "a.dcoo").string(), "--table", table, "--layout", "coo", "--id", "a"}).code, 0);
  ASSERT_EQ(dt({"write", "--input", (dir.path / "a.dcoo").string(), "--table", table, "--layout", "coo", "--id", "b"}).code, 0);
  const auto r = dt({"inspect", "--table", table});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("schema coo.v1\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("segments 2\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("id a layout COO dtype F64 shape [3,3,3] rows 4 segments 1 bytes "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("id b "), std::string::npos);
}

TEST(Cli, ErrorsAndExitCodes) {
  testutil::TempDir dir("cli-err");
  write_file(dir.path / "a.dcoo", encode_dcoo(testutil::figure5()));
  const auto table = (dir.path / "t").string();
  ASSERT_EQ(dt({"write", "--input", (dir.path / "a.dcoo").string(), "--table", table, "--layout", "csr", "--id", "a"}).code, 0);

  const auto unknown = dt({"read", "--table", table, "--id", "nope", "--out", (dir.path / "o.dcoo").string()});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.err.find("unknown id"), std::string::npos) << unknown.err;
  EXPECT_TRUE(unknown.out.empty());

  const auto again = dt({"write", "--input", (dir.path / "a.dcoo").string(), "--table", table, "--layout", "csr", "--id", "a"});
  EXPECT_EQ(again.code, 2);
  const auto schema = dt({"write", "--input", (dir.path / "a.dcoo").string(), "--table", table, "--layout", "coo"});
  EXPECT_EQ(schema.code, 1);
  EXPECT_EQ(dt({"read", "--table", (dir.path / "missing").string(), "--id", "a", "--out", "x.dcoo"}).code, 2);
  EXPECT_EQ(dt({"write", "--input", (dir.path / "nofile.dcoo").string(), "--table", table, "--layout", "csr"}).code, 2);

  write_file(dir.path / "bad.dcoo", Bytes{'D', 'C', 'O', 'X', 1, 0});
  EXPECT_EQ(dt({"write", "--input", (dir.path / "bad.dcoo").string(), "--table", table, "--layout", "csr"}).code, 2);

  EXPECT_EQ(dt({}).code, 1);
  EXPECT_EQ(dt({"frobnicate"}).code, 1);
  EXPECT_EQ(dt({"write", "--input", "a.dcoo", "--table", table, "--layout", "dense"}).code, 1);
  EXPECT_EQ(dt({"read", "--table", table, "--id", "a", "--out", "o.dcoo", "--bogus", "1"}).code, 1);
  EXPECT_EQ(dt({"slice", "--table", table, "--id", "a", "--spec", "0:9,:,:", "--out",
                (dir.path / "o.dcoo").string()}).code, 2);
  EXPECT_EQ(dt({"slice", "--table", table, "--id", "a", "--spec", "0:x", "--out", (dir.path / "o.dcoo").string()}).code, 1);
  EXPECT_EQ(dt({"--help"}).code, 0);
}

TEST(Cli, BenchWritesReport) {
  testutil::TempDir dir("cli-bench");
  const auto json = (dir.path / "r.json").string();
  const auto r = dt({"bench", "--shape", "10,6,8,9", "--density", "0.01", "--seed", "4", "--layouts", "coo,bsgs",
                     "--trials", "2", "--report", json, "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, json + "\n");
  const auto rep = bench::parse_report_json(read_text(json));
  ASSERT_EQ(rep.results.size(), 2u);
  EXPECT_EQ(rep.results[1].layout, "bsgs");
  EXPECT_EQ(rep.trials, 2);
  EXPECT_EQ(rep.seed, 4u);

  const auto csv = (dir.path / "r.csv").string();
  ASSERT_EQ(dt({"bench", "--shape", "10,6,8,9", "--density", "0.01", "--seed", "4", "--layouts", "csf", "--trials", "1",
                "--slice", "2:4,:,:,:", "--report", csv, "--format", "csv"}).code, 0);
  const auto text = read_text(csv);
  EXPECT_EQ(first_line(text), bench::csv_header());
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);

  EXPECT_EQ(dt({"bench", "--shape", "4,4", "--density", "2", "--seed", "1", "--layouts", "coo", "--trials", "1",
                "--report", json, "--format", "json"}).code, 2);
  EXPECT_EQ(dt({"bench", "--shape", "4,4", "--density", "0.5", "--seed", "1", "--layouts", "coo", "--trials", "0",
                "--report", json, "--format", "json"}).code, 1);
}

#ifdef DT_BINARY
TEST(CliBinary, ExitCodesAndStreams) {
  testutil::TempDir dir("cli-bin");
  write_file(dir.path / "a.dcoo", encode_dcoo(testutil::figure5()));
  const std::string bin = DT_BINARY;
  const auto table = (dir.path / "t").string();
  const auto run = [&](const std::string& args, std::string* out = nullptr) {
    const std::string cmd = "\"" + bin + "\" " + args + " 2>" + (dir.path / "err.txt").string();
    FILE* p = popen(cmd.c_str(), "r");
    std::string text;
    char buf[256];
    while (std::fgets(buf, sizeof buf, p)) text += buf;
    const int status = pclose(p);
    if (out) *out = text;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  std::string out;
  ASSERT_EQ(run("write --input " + (dir.path / "a.dcoo").string() + " --table " + table + " --layout csf", &out), 0);
  EXPECT_TRUE(std::regex_match(out, std::regex("csf-3d-[0-9a-f]{12}\n"))) << out;
  EXPECT_EQ(run("read --table " + table + " --id missing --out " + (dir.path / "o.dcoo").string(), &out), 2);
  EXPECT_TRUE(out.empty());
  EXPECT_NE(read_text(dir.path / "err.txt").find("unknown id"), std::string::npos);
  EXPECT_EQ(run("inspect"), 1);
}
#endif
