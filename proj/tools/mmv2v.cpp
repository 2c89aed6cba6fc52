#include "mmv2v/cli.hpp"

int main(int argc, char** argv) { return mmv2v::dispatch(argc, argv); }
