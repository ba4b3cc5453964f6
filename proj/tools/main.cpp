// Command-line driver for the expander-flow toolkit.
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emcf/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"axisymmetric expander mean curvature flow toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path, out_dir = "out";
  std::vector<std::string> overrides;
  long seed = -1;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--out", out_dir, "output directory root");
  app.add_option("--set", overrides, "override config entries, key=value (repeatable)");
  app.add_option("--seed", seed, "seed for randomized probe checks");

  const std::vector<std::string> commands = {
      "solve-expander", "spectrum",  "flow-graphical", "flow-levelset", "avoidance",
      "barrier",        "smooth",    "morse-line",     "certify"};
  for (const auto& c : commands) app.add_subcommand(c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    emcf::RunConfig cfg = emcf::RunConfig::load(config_path);
    for (const auto& kv : overrides) cfg.set_override(kv);
    if (seed >= 0) cfg.j["seed"] = seed;
    const std::string cmd = app.get_subcommands().front()->get_name();
    return emcf::dispatch(cmd, std::move(cfg), out_dir);
  } catch (const emcf::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
