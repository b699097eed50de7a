#include <string>
#include <vector>

#include "lssat_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lssat::cli::run_cli(args);
}
