// Experiment driver: each subcommand mirrors one experiment kind and reads a
// JSON config describing the problem, schedule, and run parameters. Outputs
// are a manifest, CSV tables, and JSON reports in the output directory.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "csa/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"csa: contractive stochastic approximation laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 1;
  bool force = false;

  const std::vector<std::string> experiments = {
      "simulate", "bounds", "audit", "tailfit", "hard_example", "verify_machinery", "rl_demo"};
  for (const auto& name : experiments) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", config_path, "JSON config file")->required();
    sub->add_option("-o,--out", out_dir, "output directory (overrides config)");
    sub->add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
      seed_set = true;
    });
    sub->add_option("--workers", workers, "worker threads (results are invariant)");
    sub->add_flag("--force", force, "run despite condition failures (marked in manifest)");
  }

  CLI11_PARSE(app, argc, argv);

  csa::RunOverrides ov;
  if (!out_dir.empty()) ov.out_dir = out_dir;
  if (seed_set) ov.master_seed = seed;
  ov.workers = workers;
  ov.force = force;

  // The subcommand names the experiment; it must match the config's field.
  const std::string sub = app.get_subcommands().front()->get_name();
  std::ifstream probe(config_path);
  if (!probe) {
    std::cerr << "io error: cannot open config file " << config_path << "\n";
    return static_cast<int>(csa::ExitStatus::io_error);
  }
  std::stringstream ss;
  ss << probe.rdbuf();
  std::string text = ss.str();
  // Inject/verify the experiment field so a config can be shared across runs.
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.contains("experiment")) j["experiment"] = sub;
    if (j["experiment"] != sub) {
      std::cerr << "invalid config: experiment field (" << j["experiment"]
                << ") does not match subcommand " << sub << "\n";
      return static_cast<int>(csa::ExitStatus::invalid_config);
    }
    text = j.dump();
  } catch (const std::exception& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return static_cast<int>(csa::ExitStatus::invalid_config);
  }
  return static_cast<int>(csa::run_experiment(text, ov));
}
