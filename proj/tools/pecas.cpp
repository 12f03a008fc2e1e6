#include "pecas/cli.hpp"

int main(int argc, char** argv) { return pecas::cli::dispatch({argv + 1, argv + argc}); }
