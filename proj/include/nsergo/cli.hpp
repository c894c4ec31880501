#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nsergo/config.hpp"

namespace nsergo {

/// Exit codes: 0 pass or converged, 1 usage or config error, 2 probe failure or hypothesis violation.
enum ExitCode : int { exit_pass = 0, exit_usage = 1, exit_probe = 2 };

/// Deterministic artifacts of one subcommand run. Nothing here depends on wall time or thread count.
struct RunArtifacts {
  int exit_code = exit_pass;
  std::string verdict_json;
  std::string series_csv;
  std::string summary;  // one line for the terminal
};

const std::vector<std::string>& subcommands();

/// Runs a subcommand on a validated config without touching the filesystem.
/// Throws ConfigError / std::invalid_argument on precondition failures.
RunArtifacts dispatch(const RunConfig& cfg, const std::string& subcommand);

/// Full command line (args[0] is the program name). Writes a run directory
/// runs/<timestamp>-<subcommand>/ with config.echo, verdict.json, series.csv and meta.json,
/// or for `replay --run DIR` re-executes a stored run and compares its artifacts byte for byte.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nsergo
