#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <wgal/wgal.h>

int main(int argc, char** argv) {
  CLI::App app{"Batch runner for weak-form adversarial elliptic solves and bound checks"};
  app.set_version_flag("--version", std::string(wgal_version()));
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  app.add_option("config", config, "Experiment configuration (JSON)")->required();
  app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
  app.add_option("--seed-override", seed, "Replace every seed in the config");
  app.add_flag("--quiet", quiet, "Suppress progress messages");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::uint64_t seed_value = seed.value_or(0);
  // The library reports failures on stderr itself unless quiet.
  return wgal_run_experiment(config.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(),
                             seed ? &seed_value : nullptr, quiet ? 1 : 0);
}
