// Stores one small sparse tensor in every layout under a temporary
// directory, reads it back and prints the table size per layout.

#include <cstdio>
#include <filesystem>

#include "dtensor/dtensor.hpp"

int main() {
  using namespace dtensor;
  namespace fs = std::filesystem;

  bench::GenSpec g;
  g.shape = Shape{12, 8, 16, 16};
  g.density = 0.005;
  g.seed = 1;
  const CooTensor x = bench::gen_sparse(g);
  const auto root = fs::temp_directory_path() / "dtensor-sample";
  fs::remove_all(root);
  auto os = std::make_shared<store::LocalDirStore>(root);

  int bad = 0;
  for (Layout l : kAllLayouts) {
    auto table = store::create_table(os, layout_name(l), schema_name(l));
    write_encoded(table, encode_sparse(l, x, TensorId("sample"), {}));
    const bool ok = read_coo(table, TensorId("sample")) == x &&
                    read_slice_coo(table, TensorId("sample"), SliceSpec::leading(4, 2, 4)) ==
                        slice_coo(x, SliceSpec::leading(4, 2, 4));
    std::printf("%-5s %8llu bytes  %s\n", layout_name(l).c_str(),
                static_cast<unsigned long long>(table.size_bytes()), ok ? "ok" : "MISMATCH");
    bad += ok ? 0 : 1;
  }
  fs::remove_all(root);
  return bad == 0 ? 0 : 1;
}
