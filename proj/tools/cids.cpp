#include "cids/harness.hpp"

int main(int argc, char** argv) { return cids::run_cli(argc, argv); }
