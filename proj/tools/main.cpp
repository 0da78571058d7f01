#include <string>
#include <vector>

#include "ragalign/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ragalign::cli::run(args);
}
