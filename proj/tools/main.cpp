#include "cli.hpp"

int main(int argc, char** argv) {
  return crcseg::cli::run(argc, argv);
}
