// Writes the synthetic datasets, detector frames and dual-stream replay.
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pecas/fixtures.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic fixtures", "pecas_fixtures"};
  std::string out;
  std::uint64_t seed = 42;
  app.add_option("--out", out, "Output root")->required();
  app.add_option("--seed", seed, "Seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    pecas::fixtures::write_fixtures(out, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
