#include <string>
#include <vector>

#include "lumber/cli.hpp"

int main(int argc, char** argv) {
  return lumber::run_cli(std::vector<std::string>(argv, argv + argc));
}
