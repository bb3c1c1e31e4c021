#include <cstdint>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rsmp/commands.hpp"

namespace {

void add_common(CLI::App* cmd, std::string& config, std::string& out,
                std::optional<std::uint64_t>& seed, std::optional<int>& threads,
                std::optional<std::int64_t>& max_paths, std::optional<double>& tol) {
  cmd->add_option("--config", config, "scenario configuration file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", out, "artifact directory")->required();
  cmd->add_option("--seed", seed, "override run.seed");
  cmd->add_option("--threads", threads, "cap worker threads (outputs do not depend on it)");
  cmd->add_option("--max-paths", max_paths, "override run.max_leaves");
  cmd->add_option("--tol", tol, "override run.tol");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact first-order checks for robust control on finite noise trees"};
  app.require_subcommand(1);

  rsmp::RunOptions opt;
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::int64_t> max_paths;
  std::optional<double> tol;

  CLI::App* simulate =
      app.add_subcommand("simulate", "roll the state tree under the configured control");
  CLI::App* smp_check = app.add_subcommand(
      "smp-check", "duality, stationarity and sufficiency checks at the configured control");
  CLI::App* invest =
      app.add_subcommand("invest", "closed-form robust portfolio solution and residuals");
  CLI::App* oracle =
      app.add_subcommand("oracle", "certify the configured control against a brute-force grid");
  for (CLI::App* cmd : {simulate, smp_check, invest, oracle}) {
    add_common(cmd, config, out, seed, threads, max_paths, tol);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // CLI11 returns 0 for --help; anything else is unusable input.
    return code == 0 ? 0 : 2;
  }

  opt.command = app.get_subcommands().front()->get_name();
  opt.config_path = config;
  opt.out_dir = out;
  opt.seed = seed;
  opt.threads = threads;
  opt.max_paths = max_paths;
  opt.tol = tol;
  return rsmp::run_command(opt);
}
