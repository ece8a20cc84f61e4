#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace csa {

enum class ExitStatus : int {
  ok = 0,
  failure = 1,
  condition_violation = 2,
  invalid_config = 3,
  io_error = 4,
};

struct RunOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> master_seed;
  int workers = 1;
  bool force = false;
};

/// Parses the JSON config text, runs the named experiment, and writes the
/// manifest/tables/reports into the output directory. All outputs are
/// deterministic functions of the config (worker count never changes them).
ExitStatus run_experiment(const std::string& config_text, const RunOverrides& overrides);

/// Convenience: load the config from a file first.
ExitStatus run_experiment_file(const std::string& config_path, const RunOverrides& overrides);

}  // namespace csa
