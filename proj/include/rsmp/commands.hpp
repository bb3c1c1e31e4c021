#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace rsmp {

// One CLI invocation. Optional fields override the corresponding `run` keys of
// the configuration file.
struct RunOptions {
  std::string command;  // simulate | smp-check | invest | oracle
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::int64_t> max_paths;
  std::optional<double> tol;
};

// Runs one command end to end and returns the process exit code:
// 0 every reported check passed, 1 some check failed, 2 the input was
// unusable. Artifacts land in out_dir and are written atomically with no
// timestamps, so repeated runs on the same input are byte-identical.
int run_command(const RunOptions& options);

}  // namespace rsmp
