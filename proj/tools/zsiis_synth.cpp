// Writes a directory of procedural RGB scenes for desk-scale training runs.
#include <iostream>

#include <CLI11.hpp>

#include "zsiis/cli.hpp"
#include "zsiis/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic PNG scenes"};
  std::string out;
  int count = 256, height = 64, width = 64;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "Destination directory")->required();
  app.add_option("--count", count, "Number of images")->check(CLI::PositiveNumber);
  app.add_option("--height", height, "Image height")->check(CLI::PositiveNumber);
  app.add_option("--width", width, "Image width")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Generator seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? zsiis::kExitOk : zsiis::kExitConfig;
  }
  try {
    zsiis::synth::write_scenes(out, count, height, width, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return zsiis::exit_code_for(e);
  }
  std::cout << count << " images written to " << out << '\n';
  return zsiis::kExitOk;
}
