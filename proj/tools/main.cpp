#include <string>
#include <vector>

#include "metasr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return metasr::run_cli(args);
}
