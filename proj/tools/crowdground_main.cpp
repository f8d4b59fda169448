#include <vector>

#include "cg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cg::cli_run(args);
}
