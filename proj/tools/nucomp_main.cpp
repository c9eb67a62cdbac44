#include <vector>

#include "nucomp/cli_app.hpp"

int main(int argc, char** argv) {
  return nucomp::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
