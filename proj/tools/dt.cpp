#include <string>
#include <vector>

#include "dtensor/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dtensor::cli::run(std::move(args));
}
