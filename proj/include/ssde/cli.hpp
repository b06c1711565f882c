#ifndef SSDE_CLI_HPP
#define SSDE_CLI_HPP

#include <cstdint>
#include <optional>
#include <string>

namespace ssde::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3, kIo = 4 };

/// Parsed command line. Unset optionals fall back to the configuration
/// document, then to built-in defaults.
struct RunConfig {
  std::string subcommand;
  std::string config_path;
  std::string data_path;
  std::string out_dir = ".";
  std::optional<double> horizon;
  std::optional<double> step;
  std::optional<int> samples;
  std::optional<int> burn_in;
  std::optional<int> thin;
  std::optional<std::uint64_t> seed;
  int chains = 1;
  bool dump_filter = false;
  bool store_raw = false;
  std::optional<int> stride;
};

int cmd_simulate(const RunConfig& cfg);
int cmd_infer(const RunConfig& cfg);
int cmd_diagnose(const RunConfig& cfg);

/// Parses argv, dispatches to the subcommand and maps errors to exit codes.
/// Failures print one line prefixed with "error:" on stderr.
int run_cli(int argc, char** argv);

}  // namespace ssde::cli

#endif  // SSDE_CLI_HPP
