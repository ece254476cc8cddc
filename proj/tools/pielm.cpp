#include "cli.hpp"

int main(int argc, char** argv) { return pielm::cli::run(argc, argv); }
