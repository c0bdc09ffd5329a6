#include <iostream>

#include <CLI11.hpp>

#include "upisp/errors.hpp"
#include "upisp/pipeline/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"upisp-synth: write a small synthetic RAW / RGB dataset"};
  upisp::pipeline::SynthSpec spec;
  std::string out;
  app.add_option("output", out, "Output directory")->required();
  app.add_option("--images", spec.images, "Number of images")->check(CLI::PositiveNumber);
  app.add_option("--rows", spec.rows, "Patch rows per image")->check(CLI::PositiveNumber);
  app.add_option("--cols", spec.cols, "Patch columns per image")->check(CLI::PositiveNumber);
  app.add_option("--patch", spec.patch, "RAW patch side in pixels")->check(CLI::Range(2, 4096));
  app.add_option("--seed", spec.seed, "Random seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    const auto ds = upisp::pipeline::write_synthetic_dataset(out, spec);
    std::cout << "source:    " << ds.source_dir.string() << '\n'
              << "target:    " << ds.target_dir.string() << '\n'
              << "reference: " << ds.reference_dir.string() << '\n';
  } catch (const upisp::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
